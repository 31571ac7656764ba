"""Matrix-free linear operator contract."""
from __future__ import annotations

import numpy as np

from ..grid import check_shape, field_of


class OperatorError(ValueError):
    pass


def inner(a, b) -> complex:
    """Inner product, conjugate-linear in the first argument."""
    return np.vdot(np.asarray(a).ravel(), np.asarray(b).ravel())


class LinearOperator:
    """Linear map from grids of ``in_shape`` to grids of ``out_shape``.

    Subclasses implement ``_apply`` and ``_adjoint``; ``_normal`` defaults to
    their composition and may be overridden by a fused fast path.
    """

    def __init__(self, in_shape, out_shape, in_field: str = "real", out_field: str | None = None):
        self.in_shape = tuple(int(s) for s in in_shape)
        self.out_shape = tuple(int(s) for s in out_shape)
        self.in_field = in_field
        self.out_field = out_field or in_field

    @property
    def in_size(self) -> int:
        return int(np.prod(self.in_shape))

    @property
    def out_size(self) -> int:
        return int(np.prod(self.out_shape))

    def _check(self, x, shape, field, what):
        x = np.asarray(x)
        if x.shape != shape:
            raise OperatorError(f"{type(self).__name__}.{what}: expected shape {shape}, got {x.shape}")
        if field == "real" and np.iscomplexobj(x):
            raise OperatorError(f"{type(self).__name__}.{what}: complex input to a real operator")
        if field == "complex":
            return x.astype(np.complex128, copy=False)
        return x.astype(np.float64, copy=False)

    def apply(self, x) -> np.ndarray:
        return self._apply(self._check(x, self.in_shape, self.in_field, "apply"))

    def adjoint(self, y) -> np.ndarray:
        return self._adjoint(self._check(y, self.out_shape, self.out_field, "adjoint"))

    def normal(self, x) -> np.ndarray:
        """Evaluate ``A^H A x``."""
        return self._normal(self._check(x, self.in_shape, self.in_field, "normal"))

    __call__ = apply

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    def _normal(self, x):
        return self._adjoint(self._apply(x))

    @property
    def H(self) -> "LinearOperator":
        return AdjointOperator(self)

    def __matmul__(self, other: "LinearOperator") -> "LinearOperator":
        return ComposedOperator(self, other)

    def __repr__(self):
        return f"{type(self).__name__}({self.in_shape} -> {self.out_shape})"


class AdjointOperator(LinearOperator):
    def __init__(self, op: LinearOperator):
        super().__init__(op.out_shape, op.in_shape, op.out_field, op.in_field)
        self.op = op

    def _apply(self, x):
        return self.op._adjoint(x)

    def _adjoint(self, y):
        return self.op._apply(y)


class ComposedOperator(LinearOperator):
    """``outer @ inner``."""

    def __init__(self, outer: LinearOperator, inner_op: LinearOperator):
        if outer.in_shape != inner_op.out_shape:
            raise OperatorError(f"cannot compose {outer!r} with {inner_op!r}")
        super().__init__(inner_op.in_shape, outer.out_shape, inner_op.in_field, outer.out_field)
        self.outer, self.inner = outer, inner_op

    def _apply(self, x):
        return self.outer.apply(self.inner.apply(x))

    def _adjoint(self, y):
        return self.inner.adjoint(self.outer.adjoint(y))


class IdentityOperator(LinearOperator):
    def __init__(self, shape, field: str = "real"):
        shape = check_shape(shape)
        super().__init__(shape, shape, field)

    def _apply(self, x):
        return x.copy()

    _adjoint = _apply
    _normal = _apply


class MatrixOperator(LinearOperator):
    """Explicit matrix acting on flattened grids (small problems and tests)."""

    def __init__(self, matrix, in_shape=None, out_shape=None):
        matrix = np.asarray(matrix)
        if matrix.ndim != 2:
            raise OperatorError("matrix must be 2D")
        in_shape = in_shape or (matrix.shape[1],)
        out_shape = out_shape or (matrix.shape[0],)
        field = field_of(matrix)
        super().__init__(in_shape, out_shape, field)
        self.matrix = matrix

    def _apply(self, x):
        return (self.matrix @ x.ravel()).reshape(self.out_shape)

    def _adjoint(self, y):
        return (self.matrix.conj().T @ y.ravel()).reshape(self.in_shape)


def add_noise(y, sigma: float, rng) -> np.ndarray:
    """Additive white Gaussian noise with ``E|eps_i|^2 = sigma**2``."""
    y = np.asarray(y)
    if sigma == 0:
        return y.copy()
    if np.iscomplexobj(y):
        eps = rng.normal(y.shape + (2,)) * (sigma / np.sqrt(2.0))
        return y + (eps[..., 0] + 1j * eps[..., 1])
    return y + sigma * rng.normal(y.shape)


class NormalOperator(LinearOperator):
    """``A^H A`` as a square, self-adjoint operator."""

    def __init__(self, A: LinearOperator):
        super().__init__(A.in_shape, A.in_shape, A.in_field)
        self.A = A

    def _apply(self, x):
        return self.A.normal(x)

    _adjoint = _apply
