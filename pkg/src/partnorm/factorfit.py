"""Fitting ``H(m, lam)`` to a normal operator from Gaussian probes.

Gradient convention
-------------------
For a complex parameter ``z = a + ib`` the gradient returned is
``dL/da + i dL/db``; a real parameter gets ``dL/da``.  With numpy's
unnormalized FFT pair and ``N`` samples, for a probe ``x`` with target
``t = T x`` and residual ``r = H x - t``:

plain
    ``u = ifftn(lam * fftn(x))``, ``r = m u - t``

    grad_m   = 2 conj(u) r
    grad_lam = (2 / N) conj(fftn(x)) fftn(conj(m) r)

sandwich
    ``v = m x``, ``w = ifftn(lam * fftn(v))``, ``r = conj(m) w - t``,
    ``q = ifftn(conj(lam) * fftn(m r))``

    grad_m   = 2 (conj(r) w + conj(x) q)
    grad_lam = (2 / N) conj(fftn(v)) fftn(m r)

(``(2/N) conj(fftn a) fftn b`` is ``2 conj(F a) F b`` for the unitary ``F``.)
Losses and gradients are averaged over the probe batch.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .linop.base import LinearOperator
from .linop.dense import MAX_DENSE_UNKNOWNS, dense_matrix
from .rng import SeededRng, as_rng, gaussian_probe
from .spectral import PLAIN, SANDWICH, VARIANTS, DiagCirculantFactor

LR_TOMOGRAPHY = 2e-2
LR_MRI = 2.5e-2


class FitDivergedError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class FitConfig:
    steps: int = 3000
    batch: int = 4
    lr: float = LR_TOMOGRAPHY
    optimizer: str = "amsgrad"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    init: str = "impulse"
    variant: str = PLAIN
    divergence_factor: float = 1e6
    keep_best: bool = True

    def __post_init__(self):
        if self.steps < 1 or self.batch < 1:
            raise ValueError("steps and batch must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.optimizer not in ("adam", "amsgrad", "gd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.init not in ("impulse", "identity"):
            raise ValueError(f"unknown init rule {self.init!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @classmethod
    def for_modality(cls, modality: str, **overrides) -> "FitConfig":
        lr = LR_MRI if modality == "mri" else LR_TOMOGRAPHY
        return cls(**{"lr": lr, **overrides})


@dataclass
class FitTrace:
    losses: np.ndarray
    wall_time: float = 0.0
    oracle_loss: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        """Batch loss of the returned factor."""
        step = self.extra.get("best_step", len(self.losses) - 1)
        return float(self.losses[step])


def _apply_and_residual(m, lam, x, t, variant):
    if variant == PLAIN:
        X = np.fft.fftn(x)
        u = np.fft.ifftn(lam * X)
        r = m * u - t
        return r, (X, u)
    v = m * x
    V = np.fft.fftn(v)
    w = np.fft.ifftn(lam * V)
    r = m.conj() * w - t
    return r, (V, w)


def loss_and_grad(m, lam, target, probes, variant: str = PLAIN, targets=None):
    """Batch-mean probe loss and its gradients in ``(m, lam)``.

    ``target`` is a callable (or operator with ``apply``) evaluating the
    normal operator; ``targets`` may hold precomputed ``target(x_i)``.
    """
    m = np.asarray(m)
    lam = np.asarray(lam)
    apply = getattr(target, "apply", target)
    n = lam.size
    loss = 0.0
    gm = np.zeros(m.shape, dtype=np.complex128)
    gl = np.zeros(lam.shape, dtype=np.complex128)
    for i, x in enumerate(probes):
        t = apply(x) if targets is None else targets[i]
        r, (Z, a) = _apply_and_residual(m, lam, x, t, variant)
        loss += float(np.vdot(r, r).real)
        if variant == PLAIN:
            gm += 2.0 * a.conj() * r
            gl += (2.0 / n) * Z.conj() * np.fft.fftn(m.conj() * r)
        else:
            mr_hat = np.fft.fftn(m * r)
            q = np.fft.ifftn(lam.conj() * mr_hat)
            gm += 2.0 * (r.conj() * a + np.conj(x) * q)
            gl += (2.0 / n) * Z.conj() * mr_hat
    b = len(probes)
    gm /= b
    gl /= b
    if not np.iscomplexobj(m):
        gm = gm.real
    return loss / b, gm, gl


def probe_loss(H: DiagCirculantFactor, target, x) -> float:
    apply = getattr(target, "apply", target)
    r = H.apply(x) - apply(x)
    return float(np.vdot(r, r).real)


def monte_carlo_loss(target: LinearOperator, H: DiagCirculantFactor, n_probes: int, rng) -> tuple[float, float]:
    """Mean probe loss and its standard error over ``n_probes`` probes."""
    rng = as_rng(rng)
    cplx = target.in_field == "complex"
    vals = np.array([probe_loss(H, target, gaussian_probe(target.in_shape, rng, cplx)) for _ in range(n_probes)])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_probes)) if n_probes > 1 else 0.0


def frobenius_oracle(target: LinearOperator, H: DiagCirculantFactor, max_unknowns: int = MAX_DENSE_UNKNOWNS) -> float:
    """``||dense(target) - dense(H)||_F^2`` by explicit materialization."""
    T = dense_matrix(target, max_unknowns=max_unknowns)
    M = dense_matrix(target, apply=H.apply, max_unknowns=max_unknowns)
    return float(np.sum(np.abs(T - M) ** 2))


def initial_factor(target: LinearOperator, cfg: FitConfig) -> DiagCirculantFactor:
    """``m = 1`` and ``lam`` from the impulse response at the volume centre."""
    shape = target.in_shape
    complex_m = cfg.variant == SANDWICH or target.in_field == "complex"
    m = np.ones(shape, dtype=np.complex128 if complex_m else np.float64)
    if cfg.init == "identity":
        return DiagCirculantFactor(m, np.ones(shape, dtype=np.complex128), cfg.variant)
    delta = np.zeros(shape, dtype=np.complex128 if target.in_field == "complex" else np.float64)
    delta[tuple(s // 2 for s in shape)] = 1.0
    lam = np.fft.fftn(np.fft.ifftshift(target.apply(delta)))
    return DiagCirculantFactor(m, lam, cfg.variant)


class _Adam:
    def __init__(self, cfg: FitConfig, sizes):
        self.cfg = cfg
        self.amsgrad = cfg.optimizer == "amsgrad"
        self.m = [np.zeros(s) for s in sizes]
        self.v = [np.zeros(s) for s in sizes]
        self.vmax = [np.zeros(s) for s in sizes]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        b1, b2 = c.beta1, c.beta2
        for p, g, m, v, vmax in zip(params, grads, self.m, self.v, self.vmax):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            if self.amsgrad:
                np.maximum(vmax, v, out=vmax)
                v = vmax
            mhat = m / (1 - b1**self.t)
            vhat = v / (1 - b2**self.t)
            p -= c.lr * mhat / (np.sqrt(vhat) + c.eps)


def _real_view(a):
    return a.view(np.float64) if np.iscomplexobj(a) else a


def fit_factor(target: LinearOperator, cfg: FitConfig = FitConfig(), compute_oracle: bool = True) -> tuple[DiagCirculantFactor, FitTrace]:
    """Fit ``H(m, lam)`` to the square operator ``target`` (``A^T A``).

    Only ``target.apply`` and Gaussian probes are used.  Raises
    :class:`FitDivergedError` (carrying the partial trace) if the loss grows
    beyond ``cfg.divergence_factor`` times its first value.
    """
    if target.in_shape != target.out_shape:
        raise ValueError("target must be square")
    start = time.perf_counter()
    rng = SeededRng(cfg.seed)
    H0 = initial_factor(target, cfg)
    m = np.array(H0.m, copy=True)
    lam = np.array(H0.lam, copy=True)
    cplx = target.in_field == "complex"
    params = [_real_view(m), _real_view(lam)]
    adam = _Adam(cfg, [p.shape for p in params]) if cfg.optimizer != "gd" else None
    losses = np.empty(cfg.steps)
    limit = None
    best_loss, best_step = np.inf, -1
    best_m, best_lam = np.array(m, copy=True), np.array(lam, copy=True)
    for step in range(cfg.steps):
        probes = [gaussian_probe(target.in_shape, rng, cplx) for _ in range(cfg.batch)]
        targets = [target.apply(x) for x in probes]
        loss, gm, gl = loss_and_grad(m, lam, target, probes, cfg.variant, targets)
        losses[step] = loss
        if cfg.keep_best and loss < best_loss:
            best_loss, best_step = loss, step
            best_m[...] = m
            best_lam[...] = lam
        if limit is None:
            # an exact start has loss ~0; measure growth against |T x|^2 as well
            scale = np.mean([np.vdot(t, t).real for t in targets])
            limit = cfg.divergence_factor * max(loss, scale)
        if not np.isfinite(loss) or loss > limit:
            trace = FitTrace(losses[: step + 1].copy(), time.perf_counter() - start)
            raise FitDivergedError(f"factor fit diverged at step {step} (loss {loss:.3e})", trace)
        grads = [_real_view(np.ascontiguousarray(gm)), _real_view(np.ascontiguousarray(gl))]
        if adam is not None:
            adam.step(params, grads)
        else:
            for p, g in zip(params, grads):
                p -= cfg.lr * g
    if cfg.keep_best:
        m, lam = best_m, best_lam
    H = DiagCirculantFactor(m, lam, cfg.variant)
    trace = FitTrace(losses, time.perf_counter() - start)
    trace.extra["best_step"] = int(best_step) if cfg.keep_best else cfg.steps - 1
    if compute_oracle and target.in_size <= MAX_DENSE_UNKNOWNS:
        trace.oracle_loss = frobenius_oracle(target, H)
    return H, trace
