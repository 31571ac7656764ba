"""Gradient descent, conjugate gradient, FISTA-TV and unrolled PGD."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..linop.base import LinearOperator
from ..linop.dense import power_iteration_norm
from ..metrics import evaluate
from ..rng import SeededRng
from .priors import IdentityPrior, Prior, tv_prox, total_variation

EXACT = "exact"
FACTOR = "factor"


class SolverError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class SolveReport:
    """Per-iteration trace of a solve.

    ``residuals[k]`` is the data residual after iteration ``k + 1``;
    ``seconds[k]`` the elapsed time at that point.
    """

    iterations: int = 0
    residuals: list = field(default_factory=list)
    psnr: list = field(default_factory=list)
    ssim: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    wall_time: float = 0.0
    peak_scratch_bytes: int | None = None
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    def record(self, residual, x=None, reference=None, peak=1.0, start=None):
        self.iterations += 1
        self.residuals.append(float(residual) if residual is not None else float("nan"))
        if reference is not None and x is not None:
            m = evaluate(x, reference, peak)
            self.psnr.append(m.psnr)
            self.ssim.append(m.ssim)
        if start is not None:
            self.seconds.append(time.perf_counter() - start)

    def rows(self):
        """(iteration, residual, psnr, ssim) tuples for CSV output."""
        n = self.iterations
        ps = self.psnr + [float("nan")] * (n - len(self.psnr))
        ss = self.ssim + [float("nan")] * (n - len(self.ssim))
        return [(k + 1, self.residuals[k], ps[k], ss[k]) for k in range(n)]


def _real_if(x, real):
    return x.real if real and np.iscomplexobj(x) else x


class DataStep:
    """Gradient step on ``0.5 |A x - y|^2``: ``x - eta (N x - A^H y)``.

    ``normal`` evaluates ``A^H A`` (exact mode) or a surrogate such as a
    fitted factor (factor mode); ``rhs`` is the precomputed ``A^H y``.
    """

    def __init__(self, normal, rhs, eta: float, mode: str = EXACT, residual=None):
        if not eta > 0:
            raise ValueError("step size must be positive")
        self.normal = normal
        self.rhs = np.asarray(rhs)
        self.eta = float(eta)
        self.mode = mode
        self.residual = residual
        self.real = not np.iscomplexobj(self.rhs)

    def __call__(self, x):
        g = _real_if(self.normal(x), self.real) - self.rhs
        return x - self.eta * g

    @classmethod
    def exact(cls, A: LinearOperator, y, eta: float | None = None, seed: int = 0) -> "DataStep":
        y = np.asarray(y)
        if eta is None:
            eta = 1.0 / power_iteration_norm(A, SeededRng(seed))
        return cls(A.normal, A.adjoint(y), eta, EXACT, residual=lambda x: np.linalg.norm(A.apply(x) - y))

    @classmethod
    def from_factor(cls, H, A: LinearOperator, y, eta: float, track_residual: bool = True) -> "DataStep":
        y = np.asarray(y)
        residual = (lambda x: np.linalg.norm(A.apply(x) - y)) if track_residual else None
        return cls(H.apply, A.adjoint(y), eta, FACTOR, residual=residual)


def step_size(A: LinearOperator, seed: int = 0) -> float:
    """``1 / L`` with ``L = |A^H A|_2`` from power iteration."""
    return 1.0 / power_iteration_norm(A, SeededRng(seed))


def factor_step_size(H) -> float:
    """``1 / L`` with ``L`` a spectral-norm bound of the factor itself.

    ``max|lam| max|m|^2`` for the sandwich form, ``max|lam| max|m|`` for the
    plain one.  A fitted factor may overshoot the operator it replaces, so
    the exact step size is not safe on the factor path.
    """
    mmax = float(np.abs(H.m).max())
    bound = float(np.abs(H.lam).max()) * (mmax * mmax if H.variant == "sandwich" else mmax)
    if bound == 0:
        raise ValueError("factor is identically zero")
    return 1.0 / bound


def _guard(report, r0, residual, what):
    if r0 is not None and residual is not None and r0 > 0 and residual > 1e6 * r0:
        report.status = "diverged"
        raise SolverError(f"{what} diverged (residual {residual:.3e} vs initial {r0:.3e})", report)


def gradient_descent(step: DataStep, x0, K: int, reference=None, peak: float = 1.0):
    """``K`` iterations of ``x <- x - eta (A^H A x - A^H y)``."""
    start = time.perf_counter()
    report = SolveReport()
    x = np.array(x0, copy=True)
    r0 = step.residual(x) if step.residual else None
    for _ in range(K):
        x = step(x)
        res = step.residual(x) if step.residual else None
        report.record(res, x, reference, peak, start)
        _guard(report, r0, res, "gradient descent")
    report.wall_time = time.perf_counter() - start
    return x, report


def unrolled_pgd(step: DataStep, prior: Prior, x0, K: int, reference=None, peak: float = 1.0, prior_fn=None):
    """``K`` iterations of ``x <- D(x - eta grad)``.

    ``prior_fn`` overrides how the prior is applied (e.g. patch by patch).
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    start = time.perf_counter()
    report = SolveReport()
    apply_prior = prior_fn or prior
    x = np.array(x0, copy=True)
    r0 = step.residual(x) if step.residual else None
    for _ in range(K):
        x = apply_prior(step(x))
        res = step.residual(x) if step.residual else None
        report.record(res, x, reference, peak, start)
        _guard(report, r0, res, "unrolled PGD")
    report.wall_time = time.perf_counter() - start
    return x, report


def _rdot(a, b):
    return float(np.vdot(a, b).real)


def conjugate_gradient(normal, b, x0=None, tol: float = 1e-10, max_iters: int = 500):
    """Solve ``N x = b`` for self-adjoint positive semidefinite ``N``.

    Stops when ``|N x - b| <= tol |b|``.  A non-positive curvature direction
    raises :class:`SolverError`; hitting ``max_iters`` sets
    ``report.status = "max_iters"``.
    """
    start = time.perf_counter()
    report = SolveReport()
    b = np.asarray(b)
    real = not np.iscomplexobj(b)
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=b.dtype, copy=True)
    if bnorm == 0:
        report.wall_time = time.perf_counter() - start
        return np.zeros_like(b), report
    r = b - _real_if(normal(x), real) if x0 is not None else b.copy()
    p = r.copy()
    rr = _rdot(r, r)
    if np.sqrt(rr) <= tol * bnorm:
        report.wall_time = time.perf_counter() - start
        return x, report
    for _ in range(max_iters):
        Np = _real_if(normal(p), real)
        curv = _rdot(p, Np)
        if curv <= 0:
            report.status = "breakdown"
            raise SolverError("conjugate gradient breakdown: non-positive curvature", report)
        alpha = rr / curv
        x = x + alpha * p
        r = r - alpha * Np
        rr_new = _rdot(r, r)
        report.record(np.sqrt(rr_new) / bnorm, start=start)
        if np.sqrt(rr_new) <= tol * bnorm:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    else:
        report.status = "max_iters"
    report.wall_time = time.perf_counter() - start
    return x, report


def fista_tv(A: LinearOperator, y, lam_tv: float, iters: int, eta: float | None = None, x0=None,
             tv_iters: int = 20, reference=None, peak: float = 1.0, seed: int = 0):
    """FISTA on ``0.5 |A x - y|^2 + lam_tv TV(x)`` (isotropic TV).

    The proximal step runs ``tv_iters`` dual iterations (see
    :func:`partnorm.solvers.priors.tv_prox`).  ``report.extra["objective"]``
    holds the objective after every iteration.
    """
    y = np.asarray(y)
    eta = step_size(A, seed) if eta is None else float(eta)
    start = time.perf_counter()
    report = SolveReport()
    aty = A.adjoint(y)
    x = np.zeros(A.in_shape, dtype=aty.dtype) if x0 is None else np.array(x0, copy=True)
    w = x.copy()
    t = 1.0
    r0 = np.linalg.norm(A.apply(x) - y)
    objective = []
    for _ in range(iters):
        x_prev = x
        x = tv_prox(w - eta * (A.normal(w) - aty), eta * lam_tv, tv_iters)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        w = x + ((t - 1.0) / t_new) * (x - x_prev)
        t = t_new
        res = np.linalg.norm(A.apply(x) - y)
        objective.append(0.5 * res**2 + lam_tv * total_variation(x))
        report.record(res, x, reference, peak, start)
        _guard(report, r0, res, "FISTA")
    report.extra["objective"] = objective
    report.wall_time = time.perf_counter() - start
    return x, report


def normalized_adjoint(A: LinearOperator, y) -> np.ndarray:
    """``c A^H y`` with the scalar ``c`` minimizing ``|c A A^H y - y|``."""
    y = np.asarray(y)
    z = A.adjoint(y)
    az = A.apply(z)
    den = np.vdot(az, az)
    if den == 0:
        return z
    c = np.vdot(az, y) / den
    return (c.real if not np.iscomplexobj(z) else c) * z
