"""Desk-scale timing and memory measurements.

Timings are wall-clock and vary between runs; peak scratch bytes come from
:mod:`tracemalloc` and are deterministic for a given numpy build.
"""
from __future__ import annotations

import time

import numpy as np

from . import _kernels
from ._kernels import _fallback
from .linop import ConvOperator, NormalOperator, Radon2D, default_det_count, gaussian_kernel, uniform_angles
from .partition import Selection, build_subproblem, schedule_patches
from .rng import SeededRng
from .solvers import GaussianSmooth, measure_peak, solve_subproblem
from .spectral import DiagCirculantFactor, PatchNormal, crop_kernel


def _best_of(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(max(1, repeats)):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def exact_deconvolution_factor(op: ConvOperator) -> DiagCirculantFactor:
    """The factor that reproduces the normal operator of a circular blur."""
    return DiagCirculantFactor(np.ones(op.in_shape), np.abs(op.spectrum) ** 2)


def deconvolution_problem(n: int, ndim: int = 3, seed: int = 0):
    shape = (n,) * ndim
    A = ConvOperator(gaussian_kernel(5, 1.0, ndim), shape)
    rng = SeededRng(seed)
    x = rng.uniform(size=shape)
    return A, A.apply(x), exact_deconvolution_factor(A), rng


def patch_solve_peak(n: int, p: int, K: int = 3, ndim: int = 3, seed: int = 0) -> int:
    """Peak bytes allocated by one factor-path patch solve on an ``n^d`` volume.

    The subproblem (its right-hand side needs the global operator once) and
    the cropped kernel are prepared outside the measured region, mirroring
    how a partitioned solve amortizes them.
    """
    A, y, H, rng = deconvolution_problem(n, ndim, seed)
    S = Selection((n,) * ndim, ((n - p) // 2,) * ndim, (p,) * ndim)
    kernel = crop_kernel(H, S.extents)
    context = rng.uniform(size=A.in_shape)
    sub = build_subproblem(A, y, context, S, H, kernel)
    x0 = S.extract(context)
    args = (sub, GaussianSmooth(0.8, 0.1), K, 0.5, x0, "factor")
    # warm-up so one-time library allocations are not charged to the solve
    solve_subproblem(*args)
    _, peak = measure_peak(solve_subproblem, *args)
    return peak


def prior_peaks(n: int, p: int, ndim: int = 3, seed: int = 0) -> tuple[int, int]:
    """``(full, partitioned)`` peak scratch bytes of one prior evaluation.

    The partitioned figure is the largest single-patch evaluation; the
    accumulation buffers are the output, not scratch.
    """
    x = SeededRng(seed).uniform(size=(n,) * ndim)
    prior = GaussianSmooth(1.0, 0.5)
    _, full = measure_peak(prior, x)
    sched = schedule_patches(x.shape, min(p, n), max(1, min(p, n) // 2))
    part = max(measure_peak(lambda S=S: prior(S.extract(x)))[1] for S in sched.selections[:4])
    return full, part


def data_step_times(n: int, n_angles: int, p: int, repeats: int = 3, seed: int = 0) -> dict:
    """Seconds per normal-operator evaluation on a 2D CT problem.

    ``exact`` uses the sparse ray transform and its transpose on the whole
    image; ``factor_full`` the factor on the whole image; ``factor_patch``
    the cropped kernel on one ``p x p`` patch.
    """
    A = Radon2D(n, uniform_angles(n_angles))
    T = NormalOperator(A)
    rng = SeededRng(seed)
    x = rng.uniform(size=(n, n))
    delta = np.zeros((n, n))
    delta[n // 2, n // 2] = 1.0
    H = DiagCirculantFactor(np.ones((n, n)), np.fft.fftn(np.fft.ifftshift(T.apply(delta))))
    p = min(p, n)
    S = Selection((n, n), ((n - p) // 2,) * 2, (p, p))
    P = PatchNormal(H, S, crop_kernel(H, S.extents))
    xp = S.extract(x)
    return {
        "exact": _best_of(lambda: T.apply(x), repeats),
        "factor_full": _best_of(lambda: H.apply(x), repeats),
        "factor_patch": _best_of(lambda: P(xp), repeats),
        "exact_patch": _best_of(lambda: S.extract(T.apply(S.embed(xp))), repeats),
    }


def prior_step_time(n: int, ndim: int = 2, repeats: int = 3, seed: int = 0) -> float:
    x = SeededRng(seed).uniform(size=(n,) * ndim)
    prior = GaussianSmooth(1.0, 0.5)
    return _best_of(lambda: prior(x), repeats)


def kernel_backend_times(n: int, n_angles: int, repeats: int = 3) -> dict:
    """System-matrix build time for each available ray-tracing backend."""
    angles = uniform_angles(n_angles)
    det = default_det_count(n)
    out = {"python": _best_of(lambda: _fallback.siddon_system(n, n, angles, det), repeats)}
    if _kernels.BACKEND == "cython":
        out["cython"] = _best_of(lambda: _kernels.siddon_system(n, n, angles, det), repeats)
    return out


def estimated_bytes(n: int, ndim: int) -> int:
    # volume, gradient and two temporaries in complex128
    return 4 * 16 * n**ndim


def loglog_slope(x, y) -> float:
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])
