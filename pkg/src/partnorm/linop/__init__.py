"""Forward models and operator checks."""
from .base import (
    AdjointOperator,
    ComposedOperator,
    IdentityOperator,
    LinearOperator,
    MatrixOperator,
    NormalOperator,
    OperatorError,
    add_noise,
    inner,
)
from .dense import (
    MAX_DENSE_UNKNOWNS,
    ConvergenceWarning,
    DenseOracle,
    dense_matrix,
    dot_test,
    linearity_test,
    power_iteration_norm,
)
from .mri import MriOperator, cartesian_mask, coil_maps, normalize_sensitivities
from .operators import ConvOperator, MaskOperator, gaussian_kernel, wrap_kernel
from .radon import Radon2D, default_det_count, uniform_angles

__all__ = [
    "AdjointOperator", "ComposedOperator", "ConvOperator", "ConvergenceWarning", "DenseOracle",
    "IdentityOperator", "LinearOperator", "MAX_DENSE_UNKNOWNS", "MaskOperator", "MatrixOperator",
    "MriOperator", "NormalOperator", "OperatorError", "Radon2D", "add_noise", "cartesian_mask", "coil_maps",
    "default_det_count", "dense_matrix", "dot_test", "gaussian_kernel", "inner", "linearity_test",
    "normalize_sensitivities", "power_iteration_norm", "uniform_angles", "wrap_kernel",
]
