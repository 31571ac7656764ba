"""Config-driven pipelines shared by the command line and the test-suite.

Everything here is a pure function of the configuration: randomness comes
from the seeds in the config, never from the clock.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ExperimentConfig, resolve_path
from .factorfit import FitConfig, FitTrace, fit_factor, monte_carlo_loss
from .grid import load_grid
from .linop import (
    ConvOperator,
    LinearOperator,
    MaskOperator,
    MriOperator,
    NormalOperator,
    Radon2D,
    add_noise,
    cartesian_mask,
    coil_maps,
    gaussian_kernel,
    uniform_angles,
)
from .metrics import MetricReport, evaluate, psnr_per_slice
from .partition import PatchSchedule, schedule_patches
from .phantoms import make_phantom
from .rng import SeededRng
from .solvers import (
    DataStep,
    SolveReport,
    fista_tv,
    gradient_descent,
    normalized_adjoint,
    prior_from_spec,
    step_size,
    two_step_partitioned,
    unrolled_pgd,
)
from .spectral import PLAIN, SANDWICH, DiagCirculantFactor, load_factor


@dataclass
class Problem:
    A: LinearOperator
    y: np.ndarray
    x_true: np.ndarray | None
    sigma: float
    modality: str
    extra: dict = field(default_factory=dict)


def modality_of(cfg: ExperimentConfig) -> str:
    return "mri" if cfg["linop"]["kind"] == "mri" else "tomography"


def volume_shape(cfg: ExperimentConfig) -> tuple[int, ...]:
    if "phantom" in cfg:
        return tuple(cfg["phantom"]["shape"])
    ref = cfg["experiment"]["reference"]
    if ref:
        return load_grid(resolve_path(cfg, ref)).shape
    raise ConfigError("cannot infer the volume shape without [phantom] or a reference", "experiment")


def build_operator(cfg: ExperimentConfig, shape=None) -> LinearOperator:
    if "linop" not in cfg:
        raise ConfigError("missing section", "linop")
    lin = cfg["linop"]
    shape = tuple(shape or volume_shape(cfg))
    kind = lin["kind"]
    rng = SeededRng(lin["seed"])
    if kind == "radon":
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ConfigError(f"radon needs a square 2D volume, got {shape}", "linop.kind")
        angles = np.asarray(lin["angles"]) if lin["angles"] else uniform_angles(lin["n_angles"], lin["arc"])
        return Radon2D(shape[0], angles, lin["det_count"] or None, lin["det_spacing"])
    if kind == "conv":
        return ConvOperator(gaussian_kernel(lin["kernel_size"], lin["kernel_sigma"], len(shape)), shape)
    if kind == "mask":
        return MaskOperator(rng.uniform(size=shape) < lin["keep_fraction"])
    coil_rng, mask_rng = rng.spawn(2)
    axes = tuple(lin["fft_axes"]) or None
    sens = coil_maps(shape, lin["coils"], coil_rng, lin["coil_width"])
    mask = cartesian_mask(shape, lin["acceleration"], mask_rng, lin["center_fraction"])
    return MriOperator(sens, mask, fft_axes=axes)


def build_problem(cfg: ExperimentConfig, seed: int | None = None) -> Problem:
    """Operator, ground truth and (synthesized or loaded) measurements.

    ``seed`` replaces the experiment, phantom and noise seeds at once, which
    is how seed sweeps are run from one config.
    """
    exp = cfg["experiment"]
    if seed is not None:
        over = {"experiment": {"seed": seed}}
        if "phantom" in cfg:
            over["phantom"] = {"seed": seed}
        cfg = cfg.with_overrides(**over)
        exp = cfg["experiment"]
    if exp["reference"]:
        x_true = load_grid(resolve_path(cfg, exp["reference"]))
    elif "phantom" in cfg:
        ph = cfg["phantom"]
        x_true = make_phantom(ph["kind"], ph["shape"], ph["seed"])
    else:
        x_true = None
    shape = x_true.shape if x_true is not None else None
    A = build_operator(cfg, shape)
    modality = modality_of(cfg)
    if exp["measurements"]:
        y = load_grid(resolve_path(cfg, exp["measurements"]))
        if y.shape != A.out_shape:
            raise ConfigError(f"measurements have shape {y.shape}, operator expects {A.out_shape}",
                              "experiment.measurements")
        sigma = exp["noise_sigma"]
        return Problem(A, y, x_true, sigma, modality)
    if x_true is None:
        raise ConfigError("need measurements or a phantom", "experiment")
    clean = A.apply(x_true)
    sigma = exp["noise_sigma"]
    if exp["noise_relative"]:
        sigma *= float(np.abs(clean).max())
    # noise stream is derived from the experiment seed only
    noise_rng = SeededRng(exp["seed"]).spawn(2)[1]
    y = add_noise(clean, sigma, noise_rng) if sigma > 0 else clean
    return Problem(A, y, x_true, sigma, modality)


def fit_config(cfg: ExperimentConfig, variant: str | None = None) -> FitConfig:
    ff = dict(cfg.get("factorfit") or {"seed": cfg.seed})
    ff.pop("mc_probes", None)
    chosen = variant or ff.pop("variant", "auto")
    ff.pop("variant", None)
    if chosen == "auto":
        chosen = SANDWICH if modality_of(cfg) == "mri" else PLAIN
    lr = ff.pop("lr", None)
    overrides = {k: v for k, v in ff.items()}
    if lr is not None:
        overrides["lr"] = lr
    return FitConfig.for_modality(modality_of(cfg), variant=chosen, **overrides)


def run_fit(cfg: ExperimentConfig, variant: str | None = None, A: LinearOperator | None = None):
    """Fit the factor to the normal operator of the configured operator.

    Returns ``(H, trace, summary)``; ``summary`` has the Monte Carlo loss with
    its standard error and, when the volume is small enough, the exact
    Frobenius loss.
    """
    A = A or build_operator(cfg)
    fcfg = fit_config(cfg, variant)
    target = NormalOperator(A)
    H, trace = fit_factor(target, fcfg)
    n_probes = (cfg.get("factorfit") or {}).get("mc_probes", 100)
    mc, se = monte_carlo_loss(target, H, n_probes, SeededRng(fcfg.seed).spawn(3)[2])
    summary = {
        "variant": fcfg.variant,
        "steps": fcfg.steps,
        "batch": fcfg.batch,
        "lr": fcfg.lr,
        "optimizer": fcfg.optimizer,
        "seed": fcfg.seed,
        "mc_loss": mc,
        "mc_stderr": se,
        "oracle_loss": trace.oracle_loss,
        "final_batch_loss": trace.final_loss,
    }
    return H, trace, summary


def _schedule(shape, extents, stride) -> PatchSchedule:
    def full(v):
        return tuple(v) if isinstance(v, list) else (int(v),) * len(shape)
    ext = tuple(min(e, n) for e, n in zip(full(extents), shape))
    st = tuple(max(1, min(s, e)) for s, e in zip(full(stride), ext))
    return schedule_patches(shape, ext, st)


def schedules(cfg: ExperimentConfig, shape) -> tuple[PatchSchedule, PatchSchedule]:
    """``(step-2 schedule, step-1 prior schedule)`` for a volume shape."""
    part = cfg.get("partition") or {"extents": 32, "stride": 16, "step1_extents": 0, "step1_stride": 0}
    s2 = _schedule(shape, part["extents"], part["stride"])
    e1 = part["step1_extents"] or part["extents"]
    st1 = part["step1_stride"] or part["stride"]
    return s2, _schedule(shape, e1, st1)


@dataclass
class Reconstruction:
    x: np.ndarray
    report: SolveReport
    method: str
    metrics: MetricReport | None = None
    step1: np.ndarray | None = None
    step1_metrics: MetricReport | None = None
    slice_psnr: np.ndarray | None = None


def initial_guess(problem: Problem, rule: str) -> np.ndarray:
    if rule == "normalized-adjoint":
        return normalized_adjoint(problem.A, problem.y)
    if rule == "adjoint":
        return problem.A.adjoint(problem.y)
    x = np.zeros(problem.A.in_shape)
    return x.astype(np.complex128) if problem.A.in_field == "complex" else x


def reconstruct(cfg: ExperimentConfig, problem: Problem, method: str | None = None,
                factor: DiagCirculantFactor | None = None, threads: int | None = None) -> Reconstruction:
    if "solvers" not in cfg:
        raise ConfigError("missing section", "solvers")
    sol = cfg["solvers"]
    method = method or sol["method"]
    A, y = problem.A, problem.y
    ref = problem.x_true
    peak = cfg["experiment"]["peak"]
    seed = cfg.seed
    eta = sol["eta"] if sol["eta"] is not None else step_size(A, seed)
    x0 = initial_guess(problem, sol["x0"])
    prior = prior_from_spec(sol["prior"])
    step1 = step1_metrics = None

    if method == "adjoint":
        x, report = x0, SolveReport()
    elif method == "gd":
        x, report = gradient_descent(DataStep.exact(A, y, eta), x0, sol["K"], ref, peak)
    elif method == "unrolled":
        x, report = unrolled_pgd(DataStep.exact(A, y, eta), prior, x0, sol["K"], ref, peak)
    elif method == "tv":
        lam = sol["tv_lambda"] * (problem.sigma if sol["tv_relative"] else 1.0)
        x, report = fista_tv(A, y, lam, sol["tv_iters"], eta=eta, x0=x0, tv_iters=sol["tv_inner"],
                             reference=ref, peak=peak, seed=seed)
    elif method in ("two-step", "step1-only"):
        if sol["refine"] == "auto":
            refine = problem.modality != "mri"
        else:
            refine = sol["refine"] == "yes"
        refine = refine and method == "two-step"
        s2, s1 = schedules(cfg, A.in_shape)
        if refine and sol["normal_path"] == "factor" and factor is None:
            if sol["factor"]:
                factor, _ = load_factor(resolve_path(cfg, sol["factor"]))
            else:
                factor, _, _ = run_fit(cfg, A=A)
        x, report = two_step_partitioned(
            A, y, s2, prior, K=sol["K"], K2=sol["K2"] or None, eta=eta, factor=factor, x0=x0,
            step1_schedule=s1, normal_path=sol["normal_path"], sub_solver=sol["sub_solver"],
            refine=refine, threads=threads or sol["threads"], reference=ref, peak=peak, seed=seed,
        )
        step1 = report.extra["step1"]
        step1_metrics = report.extra.get("step1_metrics")
    else:
        raise ConfigError(f"unknown method {method!r}", "solvers.method")

    if np.iscomplexobj(x) and A.in_field == "real":
        x = x.real
    out = Reconstruction(x, report, method, step1=step1, step1_metrics=step1_metrics)
    if ref is not None:
        out.metrics = evaluate(x, ref, peak)
        if cfg["experiment"]["per_slice"] and x.ndim >= 2:
            out.slice_psnr = psnr_per_slice(x, ref, peak, cfg["experiment"]["slice_axis"])
    return out


__all__ = [
    "Problem", "Reconstruction", "build_operator", "build_problem", "fit_config", "initial_guess",
    "modality_of", "reconstruct", "run_fit", "schedules", "volume_shape", "FitTrace",
]
