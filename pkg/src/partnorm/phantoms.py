"""Seeded synthetic test objects with values in [0, 1]."""
from __future__ import annotations

import numpy as np

from .rng import SeededRng, as_rng

# (intensity, semi-axis a, semi-axis b, centre x, centre y, angle in degrees):
# the modified Shepp-Logan head
_SHEPP_LOGAN = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0),
]

KINDS = ("shepp-logan", "blobs", "piecewise")


def shepp_logan_like(n: int, seed: int | None = None) -> np.ndarray:
    """Modified Shepp-Logan head on an ``n x n`` grid.

    With a seed, the inner ellipses are jittered in position, size and
    intensity so that every seed gives a different but similar object.
    """
    coords = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    img = np.zeros((n, n))
    rng = SeededRng(seed) if seed is not None else None
    for k, (val, a, b, x0, y0, phi) in enumerate(_SHEPP_LOGAN):
        if rng is not None and k >= 2:
            x0 += rng.uniform(-0.03, 0.03)
            y0 += rng.uniform(-0.03, 0.03)
            a *= rng.uniform(0.85, 1.15)
            b *= rng.uniform(0.85, 1.15)
            val *= rng.uniform(0.6, 1.4)
            phi += rng.uniform(-10, 10)
        t = np.deg2rad(phi)
        xr = (xx - x0) * np.cos(t) + (yy - y0) * np.sin(t)
        yr = -(xx - x0) * np.sin(t) + (yy - y0) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += val
    img = np.clip(img, 0.0, None)
    return img / img.max()


def blobs_3d(shape, seed: int = 0, n_blobs: int = 6) -> np.ndarray:
    """Sum of random anisotropic Gaussian blobs, scaled to ``[0, 1]``."""
    rng = as_rng(seed)
    shape = tuple(shape)
    grids = np.meshgrid(*[np.linspace(-1, 1, s) for s in shape], indexing="ij")
    vol = np.zeros(shape)
    for _ in range(n_blobs):
        centre = rng.uniform(-0.6, 0.6, len(shape))
        width = rng.uniform(0.1, 0.35, len(shape))
        amp = rng.uniform(0.3, 1.0)
        vol += amp * np.exp(-0.5 * sum(((g - c) / w) ** 2 for g, c, w in zip(grids, centre, width)))
    return vol / vol.max()


def piecewise_constant_1d(n: int, seed: int = 0, n_jumps: int = 6) -> np.ndarray:
    rng = as_rng(seed)
    cuts = np.sort(rng.generator.choice(np.arange(1, n), size=min(n_jumps, n - 1), replace=False))
    levels = rng.uniform(0.0, 1.0, len(cuts) + 1)
    out = np.empty(n)
    for lo, hi, v in zip(np.r_[0, cuts], np.r_[cuts, n], levels):
        out[lo:hi] = v
    return out


def make_phantom(kind: str, shape, seed: int = 0) -> np.ndarray:
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if kind == "shepp-logan":
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError("shepp-logan phantoms are square 2D")
        return shepp_logan_like(shape[0], seed)
    if kind == "blobs":
        return blobs_3d(shape, seed)
    if kind == "piecewise":
        if len(shape) != 1:
            raise ValueError("piecewise phantoms are 1D")
        return piecewise_constant_1d(shape[0], seed)
    raise ValueError(f"unknown phantom kind {kind!r}")
