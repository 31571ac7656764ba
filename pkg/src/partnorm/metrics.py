"""Image quality metrics (PSNR, SSIM).

SSIM uses a uniform window of 7 samples per dimension, stabilizers
``C1 = (0.01 * peak)**2`` and ``C2 = (0.03 * peak)**2``, unbiased (N - 1)
local variances, and averages the SSIM map over the windows that lie
entirely inside the grid.  Complex inputs are compared in magnitude.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

#: Returned by :func:`psnr` when the two grids are identical.
PSNR_MAX = 200.0
SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    mse: float


def _pair(x, ref):
    x, ref = np.asarray(x), np.asarray(ref)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")
    if np.iscomplexobj(x) or np.iscomplexobj(ref):
        x, ref = np.abs(x), np.abs(ref)
    return x.astype(np.float64), ref.astype(np.float64)


def mse(x, ref) -> float:
    x, ref = _pair(x, ref)
    return float(np.mean((x - ref) ** 2))


def psnr(x, ref, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at :data:`PSNR_MAX`."""
    if not peak > 0:
        raise ValueError("peak must be positive")
    err = mse(x, ref)
    if err == 0.0:
        return PSNR_MAX
    return float(min(PSNR_MAX, 10.0 * np.log10(peak**2 / err)))


def psnr_per_slice(x, ref, peak: float = 1.0, axis: int = 0) -> np.ndarray:
    """PSNR of each slice along ``axis``."""
    x, ref = _pair(x, ref)
    return np.array([
        psnr(xs, rs, peak)
        for xs, rs in zip(np.moveaxis(x, axis, 0), np.moveaxis(ref, axis, 0))
    ])


def ssim(x, ref, peak: float = 1.0) -> float:
    x, ref = _pair(x, ref)
    if x.ndim not in (2, 3):
        raise ValueError("ssim is defined for 2D and 3D grids")
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"grid {x.shape} smaller than the {SSIM_WINDOW}-wide window")
    w = SSIM_WINDOW
    npix = w**x.ndim
    cov_norm = npix / (npix - 1.0)
    ux = uniform_filter(x, size=w, mode="constant")
    uy = uniform_filter(ref, size=w, mode="constant")
    uxx = uniform_filter(x * x, size=w, mode="constant")
    uyy = uniform_filter(ref * ref, size=w, mode="constant")
    uxy = uniform_filter(x * ref, size=w, mode="constant")
    vx = cov_norm * (uxx - ux * ux)
    vy = cov_norm * (uyy - uy * uy)
    vxy = cov_norm * (uxy - ux * uy)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    smap = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux**2 + uy**2 + c1) * (vx + vy + c2))
    pad = w // 2
    inner = tuple(slice(pad, s - pad) for s in x.shape)
    return float(np.mean(smap[inner]))


def evaluate(x, ref, peak: float = 1.0) -> MetricReport:
    x_arr = np.asarray(x)
    s = ssim(x, ref, peak) if x_arr.ndim >= 2 and min(x_arr.shape) >= SSIM_WINDOW else float("nan")
    return MetricReport(psnr=psnr(x, ref, peak), ssim=s, mse=mse(x, ref))
