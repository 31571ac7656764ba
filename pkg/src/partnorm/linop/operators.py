"""Inpainting and circular convolution forward models."""
from __future__ import annotations

import numpy as np

from ..grid import check_shape
from .base import LinearOperator, OperatorError


class MaskOperator(LinearOperator):
    """Pointwise binary masking; ``A^T A = A``."""

    def __init__(self, mask, field: str = "real"):
        mask = np.asarray(mask, dtype=np.float64)
        check_shape(mask.shape)
        if not np.all((mask == 0) | (mask == 1)):
            raise OperatorError("mask entries must be 0 or 1")
        super().__init__(mask.shape, mask.shape, field)
        self.mask = mask

    def _apply(self, x):
        return self.mask * x

    _adjoint = _apply
    _normal = _apply


def wrap_kernel(kernel, shape) -> np.ndarray:
    """Place centered spatial taps into a circular buffer of ``shape``.

    The tap at index ``kernel.shape // 2`` becomes offset 0; offset ``o`` goes
    to index ``o mod n`` per dimension.
    """
    kernel = np.asarray(kernel)
    if kernel.ndim != len(shape) or any(k > n for k, n in zip(kernel.shape, shape)):
        raise OperatorError(f"kernel {kernel.shape} does not fit in volume {tuple(shape)}")
    out = np.zeros(shape, dtype=kernel.dtype)
    idx = np.ix_(*[(np.arange(k) - k // 2) % n for k, n in zip(kernel.shape, shape)])
    np.add.at(out, idx, kernel)
    return out


class ConvOperator(LinearOperator):
    """Circular convolution with a centered kernel.

    ``spectrum`` is the (unnormalized) DFT of the wrapped kernel, so that
    ``apply(x) = ifftn(spectrum * fftn(x))``; the normal operator is circulant
    with spectrum ``|spectrum|**2``.
    """

    def __init__(self, kernel, shape, field: str = "real"):
        shape = check_shape(shape)
        kernel = np.asarray(kernel)
        if field == "real" and np.iscomplexobj(kernel):
            raise OperatorError("a real convolution needs a real kernel")
        super().__init__(shape, shape, field)
        self.kernel = kernel
        self.spectrum = np.fft.fftn(wrap_kernel(kernel, shape))

    def _filter(self, x, response):
        out = np.fft.ifftn(response * np.fft.fftn(x))
        return out.real if self.in_field == "real" else out

    def _apply(self, x):
        return self._filter(x, self.spectrum)

    def _adjoint(self, y):
        return self._filter(y, self.spectrum.conj())

    def _normal(self, x):
        return self._filter(x, np.abs(self.spectrum) ** 2)


def gaussian_kernel(size: int, sigma: float, ndim: int = 2) -> np.ndarray:
    """Normalized isotropic Gaussian blur kernel of odd ``size``."""
    ax = np.arange(size) - size // 2
    g = np.exp(-0.5 * (ax / sigma) ** 2)
    k = g
    for _ in range(ndim - 1):
        k = np.multiply.outer(k, g)
    return k / k.sum()
