"""Classical priors standing in for a learned denoiser in unrolled loops."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from ..partition import PatchSchedule, aggregate


class Prior:
    name = "prior"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class IdentityPrior(Prior):
    name = "identity"

    def __call__(self, x):
        return x


class GaussianSmooth(Prior):
    """``(1 - weight) x + weight * G_sigma x`` with a nearest-edge Gaussian blur."""

    name = "gaussian"

    def __init__(self, sigma: float, weight: float = 1.0):
        if sigma < 0 or not 0 <= weight <= 1:
            raise ValueError("need sigma >= 0 and 0 <= weight <= 1")
        self.sigma, self.weight = float(sigma), float(weight)

    def _blur(self, x):
        if np.iscomplexobj(x):
            return self._blur(x.real) + 1j * self._blur(x.imag)
        return gaussian_filter(x, self.sigma, mode="nearest")

    def __call__(self, x):
        if self.sigma == 0 or self.weight == 0:
            return x
        return (1.0 - self.weight) * x + self.weight * self._blur(x)


def grad(u: np.ndarray) -> np.ndarray:
    """Forward differences along every axis (zero at the far edge)."""
    g = np.zeros((u.ndim,) + u.shape, dtype=u.dtype)
    for ax in range(u.ndim):
        d = np.diff(u, axis=ax)
        idx = [slice(None)] * u.ndim
        idx[ax] = slice(0, u.shape[ax] - 1)
        g[(ax,) + tuple(idx)] = d
    return g


def grad_adjoint(p: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`grad` (negative divergence)."""
    ndim = p.ndim - 1
    out = np.zeros(p.shape[1:], dtype=p.dtype)
    for ax in range(ndim):
        pa = p[ax]
        n = pa.shape[ax]
        lo = [slice(None)] * ndim
        hi = [slice(None)] * ndim
        lo[ax] = slice(0, n - 1)
        hi[ax] = slice(1, n)
        out[tuple(lo)] -= pa[tuple(lo)]
        out[tuple(hi)] += pa[tuple(lo)]
    return out


def total_variation(u: np.ndarray) -> float:
    """Isotropic TV: sum over voxels of the Euclidean norm of the gradient."""
    g = grad(u)
    return float(np.sum(np.sqrt(np.sum(np.abs(g) ** 2, axis=0))))


def tv_prox(v: np.ndarray, weight: float, iters: int = 20) -> np.ndarray:
    """``argmin_u 0.5 |u - v|^2 + weight * TV(u)``.

    Fast gradient projection on the dual (Beck & Teboulle) with a fixed
    number of iterations and a cold start, so the map is deterministic.
    """
    if weight <= 0:
        return np.array(v, copy=True)
    step = 1.0 / (4.0 * v.ndim * weight)
    p = np.zeros((v.ndim,) + v.shape, dtype=v.dtype)
    q = p.copy()
    t = 1.0
    for _ in range(iters):
        u = v - weight * grad_adjoint(q)
        p_new = q + step * grad(u)
        norm = np.sqrt(np.sum(np.abs(p_new) ** 2, axis=0))
        p_new /= np.maximum(norm, 1.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        q = p_new + ((t - 1.0) / t_new) * (p_new - p)
        p, t = p_new, t_new
    return v - weight * grad_adjoint(p)


class TVProx(Prior):
    name = "tv"

    def __init__(self, weight: float, iters: int = 20):
        self.weight, self.iters = float(weight), int(iters)

    def __call__(self, x):
        return tv_prox(x, self.weight, self.iters)


def apply_patchwise(prior: Prior, x: np.ndarray, schedule: PatchSchedule | None) -> np.ndarray:
    """Run ``prior`` patch by patch over ``schedule`` and merge the results."""
    if schedule is None or isinstance(prior, IdentityPrior):
        return prior(x)
    return aggregate(schedule, (prior(S.extract(x)) for S in schedule))


def prior_from_spec(spec: dict | None) -> Prior:
    spec = dict(spec or {})
    kind = spec.pop("kind", "identity")
    if kind == "identity":
        prior = IdentityPrior()
    elif kind == "gaussian":
        prior = GaussianSmooth(spec.pop("sigma", 1.0), spec.pop("weight", 1.0))
    elif kind == "tv":
        prior = TVProx(spec.pop("weight", 0.01), spec.pop("iters", 20))
    else:
        raise ValueError(f"unknown prior kind {kind!r}")
    if spec:
        raise ValueError(f"unknown prior keys: {sorted(spec)}")
    return prior
