"""Dense materialization and numerical checks of operators."""
from __future__ import annotations

import warnings

import numpy as np

from ..rng import gaussian_probe
from .base import LinearOperator, OperatorError, inner

MAX_DENSE_UNKNOWNS = 4096


class ConvergenceWarning(RuntimeWarning):
    pass


def dense_matrix(op, in_shape=None, apply=None, max_unknowns: int = MAX_DENSE_UNKNOWNS) -> np.ndarray:
    """Matrix of ``op`` built column by column from basis-vector applies.

    ``apply`` defaults to ``op.apply``; pass e.g. ``op.normal`` to materialize
    another map on the same domain.
    """
    in_shape = tuple(in_shape or op.in_shape)
    n = int(np.prod(in_shape))
    if n > max_unknowns:
        raise OperatorError(f"{n} unknowns exceed the dense limit of {max_unknowns}")
    apply = apply or op.apply
    complex_in = getattr(op, "in_field", "real") == "complex"
    e = np.zeros(n, dtype=np.complex128 if complex_in else np.float64)
    cols = []
    for j in range(n):
        e[j] = 1.0
        cols.append(np.asarray(apply(e.reshape(in_shape))).ravel().copy())
        e[j] = 0.0
    return np.stack(cols, axis=1)


class DenseOracle:
    """Explicit matrix of a (small) operator, for verification."""

    def __init__(self, op: LinearOperator, apply=None):
        self.in_shape = op.in_shape
        self.matrix = dense_matrix(op, apply=apply)

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x).ravel()


def dot_test(op: LinearOperator, rng, x=None, y=None) -> float:
    """Relative adjoint mismatch ``|<Ax, y> - <x, A^H y>| / (|Ax| |y|)``."""
    cin, cout = op.in_field == "complex", op.out_field == "complex"
    x = gaussian_probe(op.in_shape, rng, cin) if x is None else x
    y = gaussian_probe(op.out_shape, rng, cout) if y is None else y
    ax = op.apply(x)
    lhs = inner(y, ax)
    rhs = inner(op.adjoint(y), x)
    scale = np.linalg.norm(ax) * np.linalg.norm(y)
    return float(abs(lhs - rhs) / scale) if scale > 0 else float(abs(lhs - rhs))


def linearity_test(op: LinearOperator, rng) -> float:
    cplx = op.in_field == "complex"
    x = gaussian_probe(op.in_shape, rng, cplx)
    z = gaussian_probe(op.in_shape, rng, cplx)
    alpha, beta = rng.normal(2)
    lhs = op.apply(alpha * x + beta * z)
    rhs = alpha * op.apply(x) + beta * op.apply(z)
    scale = np.linalg.norm(rhs) + np.linalg.norm(lhs)
    return float(np.linalg.norm(lhs - rhs) / scale) if scale > 0 else 0.0


def power_iteration_norm(op, rng, iters: int = 200, tol: float = 1e-8, apply=None) -> float:
    """Spectral norm of the normal operator ``A^H A`` by power iteration.

    ``apply`` overrides the map iterated on (default ``op.normal``); it must be
    self-adjoint positive semidefinite for the estimate to be the norm.  If
    the relative change of the estimate is still above ``tol`` after ``iters``
    steps a :class:`ConvergenceWarning` carrying the last estimate is issued.
    """
    apply = apply or op.normal
    x = gaussian_probe(op.in_shape, rng, op.in_field == "complex")
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        z = apply(x)
        new = float(np.linalg.norm(z))
        if new == 0.0:
            return 0.0
        x = z / new
        if abs(new - est) <= tol * new:
            return new
        est = new
    warnings.warn(
        f"power iteration did not converge in {iters} steps; last estimate {est:.12g}",
        ConvergenceWarning,
        stacklevel=2,
    )
    return est
