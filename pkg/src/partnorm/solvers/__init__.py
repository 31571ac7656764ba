"""Reconstruction algorithms."""
from .algorithms import (
    EXACT,
    FACTOR,
    DataStep,
    SolveReport,
    SolverError,
    conjugate_gradient,
    factor_step_size,
    fista_tv,
    gradient_descent,
    normalized_adjoint,
    step_size,
    unrolled_pgd,
)
from .partitioned import measure_peak, solve_subproblem, two_step_partitioned
from .priors import (
    GaussianSmooth,
    IdentityPrior,
    Prior,
    TVProx,
    apply_patchwise,
    grad,
    grad_adjoint,
    prior_from_spec,
    total_variation,
    tv_prox,
)

__all__ = [
    "DataStep", "EXACT", "FACTOR", "GaussianSmooth", "IdentityPrior", "Prior", "SolveReport",
    "SolverError", "TVProx", "apply_patchwise", "conjugate_gradient", "factor_step_size", "fista_tv", "grad",
    "grad_adjoint", "gradient_descent", "measure_peak", "normalized_adjoint", "prior_from_spec",
    "solve_subproblem", "step_size", "total_variation", "tv_prox", "two_step_partitioned",
    "unrolled_pgd",
]
