"""Cartesian multi-coil MRI forward model with unitary DFTs."""
from __future__ import annotations

import numpy as np

from ..grid import check_shape
from .base import LinearOperator, OperatorError


def normalize_sensitivities(sens) -> np.ndarray:
    """Scale coil maps so that ``sum_c |S_c|^2 = 1`` wherever it is nonzero."""
    sens = np.asarray(sens, dtype=np.complex128)
    rss = np.sqrt(np.sum(np.abs(sens) ** 2, axis=0))
    scale = np.divide(1.0, rss, out=np.zeros_like(rss), where=rss > 0)
    return sens * scale


class MriOperator(LinearOperator):
    """``y_c = M F S_c x`` for each coil ``c``.

    Parameters
    ----------
    sensitivities : array, shape (C, *volume)
        Complex coil maps; normalized to unit root-sum-of-squares unless
        ``normalize=False``.
    mask : array, shape volume
        Binary k-space sampling mask (zeros are kept in the output).
    fft_axes : tuple of int, optional
        Volume axes the DFT acts on.  Leaving out axis 0 of a 3D volume gives
        the hybrid x-ky-kz form, which is block-separable along that axis.
    """

    def __init__(self, sensitivities, mask, fft_axes=None, normalize: bool = True):
        sens = np.asarray(sensitivities, dtype=np.complex128)
        if sens.ndim < 2:
            raise OperatorError("sensitivities must have shape (C, *volume)")
        shape = check_shape(sens.shape[1:])
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != shape:
            raise OperatorError(f"mask shape {mask.shape} != volume shape {shape}")
        if not np.all((mask == 0) | (mask == 1)):
            raise OperatorError("mask entries must be 0 or 1")
        self.sensitivities = normalize_sensitivities(sens) if normalize else sens
        self.mask = mask
        self.fft_axes = tuple(range(-len(shape), 0)) if fft_axes is None else tuple(
            a - len(shape) if a >= 0 else a for a in fft_axes
        )
        super().__init__(shape, (sens.shape[0],) + shape, "complex")

    @property
    def n_coils(self) -> int:
        return self.sensitivities.shape[0]

    def _apply(self, x):
        return self.mask * np.fft.fftn(self.sensitivities * x, axes=self.fft_axes, norm="ortho")

    def _adjoint(self, y):
        img = np.fft.ifftn(self.mask * y, axes=self.fft_axes, norm="ortho")
        return np.sum(self.sensitivities.conj() * img, axis=0)

    def slab(self, start: int, stop: int, axis: int = 0) -> "MriOperator":
        """Operator restricted to ``volume[start:stop]`` along a non-FFT axis."""
        ax = axis - len(self.in_shape) if axis >= 0 else axis
        if ax in self.fft_axes:
            raise OperatorError("slabs must be taken along an axis the DFT does not act on")
        sl = [slice(None)] * len(self.in_shape)
        sl[axis] = slice(start, stop)
        sl = tuple(sl)
        return MriOperator(
            self.sensitivities[(slice(None),) + sl], self.mask[sl], self.fft_axes, normalize=False
        )


def coil_maps(shape, n_coils: int, rng, width: float = 0.6) -> np.ndarray:
    """Smooth synthetic coil sensitivities.

    Coils sit on a ring around the volume centre with Gaussian magnitude falloff
    and a random smooth (linear) phase.
    """
    shape = check_shape(shape)
    grids = np.meshgrid(*[np.linspace(-1, 1, n) for n in shape], indexing="ij")
    maps = []
    for c in range(n_coils):
        phi = 2 * np.pi * c / max(n_coils, 1)
        centre = np.zeros(len(shape))
        centre[-1] = np.cos(phi)
        if len(shape) > 1:
            centre[-2] = np.sin(phi)
        if n_coils == 1:
            centre[:] = 0.0
        r2 = sum((g - c0) ** 2 for g, c0 in zip(grids, centre))
        slope = rng.normal(len(shape))
        phase = sum(s * g for s, g in zip(slope, grids)) + rng.uniform(-np.pi, np.pi)
        maps.append(np.exp(-r2 / (2 * width**2)) * np.exp(1j * phase))
    return np.stack(maps)


def cartesian_mask(shape, acceleration: float, rng, center_fraction: float = 0.08, axes=None) -> np.ndarray:
    """Random Cartesian undersampling mask with a fully sampled centre.

    Sampling is decided per k-space index along ``axes`` (default: the last
    axis) and extended over the remaining axes.  The mask uses the unshifted
    DFT layout, i.e. the k-space centre is index 0.
    """
    shape = check_shape(shape)
    axes = (len(shape) - 1,) if axes is None else tuple(axes)
    sub_shape = tuple(shape[a] for a in axes)
    keep = rng.uniform(size=sub_shape) < 1.0 / acceleration
    centred = np.zeros(sub_shape, dtype=bool)
    idx = []
    for n in sub_shape:
        half = max(1, int(round(center_fraction * n / 2)))
        idx.append(np.r_[0:half, n - half + 1:n] if half > 1 else np.array([0]))
    centred[np.ix_(*idx)] = True
    sub = (keep | centred).astype(np.float64)
    expand = [shape[a] if a in axes else 1 for a in range(len(shape))]
    return np.broadcast_to(sub.reshape(expand), shape).copy()
