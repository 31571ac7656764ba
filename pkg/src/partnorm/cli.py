"""``partnorm`` command line.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 solver failure.  ``PARTNORM_OUTPUT`` overrides the output directory and
``PARTNORM_THREADS`` caps the worker pool; command-line flags win over both.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, bench
from ._kernels import BACKEND
from .config import ConfigError, ExperimentConfig, dumps, load
from .experiments import build_operator, build_problem, reconstruct, run_fit
from .factorfit import FitDivergedError
from .grid import save_grid, write_pgm
from .phantoms import KINDS, make_phantom
from .solvers import SolverError
from .spectral import save_factor
from .verify import SUITES, run_suites

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_fmt) + "\n")
    return path


def output_dir(args, cfg: ExperimentConfig | None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if os.environ.get("PARTNORM_OUTPUT"):
        return Path(os.environ["PARTNORM_OUTPUT"])
    return Path(cfg["experiment"]["output"]) if cfg is not None else Path("out")


def thread_cap(args, cfg: ExperimentConfig | None) -> int:
    if getattr(args, "threads", None):
        n = args.threads
    elif os.environ.get("PARTNORM_THREADS"):
        try:
            n = int(os.environ["PARTNORM_THREADS"])
        except ValueError:
            raise ConfigError("PARTNORM_THREADS must be an integer") from None
    elif cfg is not None and "solvers" in cfg:
        n = cfg["solvers"]["threads"]
    else:
        n = 1
    if n < 1:
        raise ConfigError("thread cap must be >= 1")
    return n


def _load(args) -> ExperimentConfig:
    return load(args.config)


# -- verify -----------------------------------------------------------------

def _verify_options(cfg: ExperimentConfig | None) -> dict:
    if cfg is not None and "verify" in cfg:
        return dict(cfg["verify"])
    seed = cfg.seed if cfg is not None else 0
    return {"seed": seed}


def cmd_verify(args) -> int:
    cfg = _load(args) if args.config else None
    opts = _verify_options(cfg)
    suites = list(args.filter or opts.pop("suites", None) or SUITES)
    opts.pop("suites", None)
    unknown = [s for s in suites if s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s) {', '.join(unknown)}; choose from {', '.join(SUITES)}", "--filter")
    checks = run_suites(suites, opts)
    out = output_dir(args, cfg)
    path = write_csv(out / "verify.csv", ("suite", "case", "value", "tolerance", "status"),
                     (c.row() for c in checks))
    failed = sorted({c.suite for c in checks if not c.passed})
    for suite in suites:
        rows = [c for c in checks if c.suite == suite]
        bad = sum(not c.passed for c in rows)
        print(f"{suite:16s} {'FAIL' if bad else 'pass'}  {len(rows) - bad}/{len(rows)}")
    print(f"wrote {path}")
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- fit-factor ---------------------------------------------------------------

def cmd_fit_factor(args) -> int:
    cfg = _load(args)
    out = output_dir(args, cfg)
    A = build_operator(cfg)
    try:
        H, trace, summary = run_fit(cfg, variant=args.variant, A=A)
    except FitDivergedError as exc:
        write_csv(out / "fit_trace.csv", ("step", "batch_loss"), enumerate(exc.trace.losses))
        raise CommandError(str(exc), EXIT_SOLVER) from None
    summary["config_hash"] = cfg.hash()
    summary["operator"] = cfg["linop"]["kind"]
    save_factor(H, out / "factor", summary)
    write_csv(out / "fit_trace.csv", ("step", "batch_loss"), enumerate(trace.losses))
    write_json(out / "fit_timing.json", {"wall_time": trace.wall_time})
    print(f"variant {summary['variant']}  monte-carlo loss {summary['mc_loss']:.6e} "
          f"(+/- {summary['mc_stderr']:.2e})")
    if summary["oracle_loss"] is not None:
        print(f"frobenius oracle loss {summary['oracle_loss']:.6e}")
    print(f"wrote {out / 'factor'}")
    return EXIT_OK


# -- reconstruct ----------------------------------------------------------------

def _metrics_rows(rec, label):
    rows = []
    refined = rec.method == "two-step" and rec.report.extra.get("context_source") != "none"
    if refined and rec.step1_metrics is not None:
        m = rec.step1_metrics
        rows.append((label, "step1", m.psnr, m.ssim, m.mse))
    if rec.metrics is not None:
        m = rec.metrics
        rows.append((label, "step2" if refined else "final", m.psnr, m.ssim, m.mse))
    return rows


def cmd_reconstruct(args) -> int:
    cfg = _load(args)
    if args.publish or cfg["experiment"]["require_verified"]:
        checks = run_suites(None, _verify_options(cfg))
        failed = sorted({c.suite for c in checks if not c.passed})
        if failed:
            raise CommandError(f"publication mode needs a green verify run; failing: {', '.join(failed)}",
                               EXIT_VERIFY)
    if args.method:
        cfg = cfg.with_overrides(solvers={"method": args.method})
    if args.K is not None:
        cfg = cfg.with_overrides(solvers={"K": args.K})
    threads = thread_cap(args, cfg)
    out = output_dir(args, cfg)
    problem = build_problem(cfg, seed=args.seed)
    method = cfg["solvers"]["method"]
    seed = cfg.seed if args.seed is None else args.seed
    stem = f"{cfg['experiment']['name']}-{method}-s{seed}"
    try:
        rec = reconstruct(cfg, problem, threads=threads)
    except SolverError as exc:
        if exc.report is not None:
            write_csv(out / f"{stem}.report.csv", ("iteration", "residual", "psnr", "ssim"), exc.report.rows())
        raise CommandError(f"solver failed: {exc}", EXIT_SOLVER) from None
    peak = cfg["experiment"]["peak"]
    save_grid(out / stem, rec.x, peak)
    if rec.x.ndim == 2:
        write_pgm(out / f"{stem}.pgm", np.abs(rec.x), peak)
    write_csv(out / f"{stem}.report.csv", ("iteration", "residual", "psnr", "ssim"), rec.report.rows())
    write_csv(out / f"{stem}.timing.csv", ("iteration", "seconds"),
              enumerate(rec.report.seconds, start=1))
    rows = _metrics_rows(rec, method)
    if rows:
        write_csv(out / f"{stem}.metrics.csv", ("method", "stage", "psnr", "ssim", "mse"), rows)
    if rec.slice_psnr is not None:
        write_csv(out / f"{stem}.slices.csv", ("slice", "psnr"), enumerate(rec.slice_psnr))
    manifest = {
        "config_hash": cfg.hash(),
        "method": method,
        "seed": seed,
        "status": rec.report.status,
        "iterations": rec.report.iterations,
        "noise_sigma": problem.sigma,
        "metrics": {stage: {"psnr": p, "ssim": s, "mse": e} for _, stage, p, s, e in rows},
    }
    write_json(out / f"{stem}.json", manifest)
    for _, stage, p, s, _ in rows:
        print(f"{method:11s} {stage:6s} psnr {p:7.3f} dB  ssim {s:.4f}")
    print(f"wrote {out / stem}.grid")
    return EXIT_OK


# -- bench ------------------------------------------------------------------------

def cmd_bench(args) -> int:
    cfg = _load(args)
    if "bench" not in cfg:
        raise ConfigError("missing section", "bench")
    b = cfg["bench"]
    out = output_dir(args, cfg)
    rows = []
    notes = []
    for n in b["sizes"]:
        if bench.estimated_bytes(n, 3) > b["memory_cap_bytes"]:
            notes.append(f"size {n}: skipped, estimated {bench.estimated_bytes(n, 3)} bytes over the cap")
            continue
        full, part = bench.prior_peaks(n, b["patch"], seed=b["seed"])
        rows.append(("prior_peak_bytes_full", n, 0, b["patch"], full))
        rows.append(("prior_peak_bytes_partitioned", n, 0, b["patch"], part))
        rows.append(("patch_solve_peak_bytes", n, 0, b["patch"], bench.patch_solve_peak(n, b["patch"], seed=b["seed"])))
        rows.append(("prior_step_seconds_2d", n, 0, 0, bench.prior_step_time(n, 2, b["repeats"], b["seed"])))
        for n_angles in b["angles"]:
            times = bench.data_step_times(n, n_angles, b["patch"], b["repeats"], b["seed"])
            for key, sec in times.items():
                rows.append((f"data_step_seconds_{key}", n, n_angles, b["patch"], sec))
        for backend, sec in bench.kernel_backend_times(n, b["angles"][0], b["repeats"]).items():
            rows.append((f"siddon_build_seconds_{backend}", n, b["angles"][0], 0, sec))
    path = write_csv(out / "bench.csv", ("quantity", "n", "angles", "patch", "value"), rows)
    for note in notes:
        print(note)
    print(f"kernel backend in use: {BACKEND}")
    print(f"wrote {path}")
    return EXIT_OK


# -- phantom / plot-data ------------------------------------------------------------

def cmd_phantom(args) -> int:
    x = make_phantom(args.kind, args.shape, args.seed)
    out = Path(args.out)
    save_grid(out, x, 1.0)
    if x.ndim == 2:
        write_pgm(out.with_suffix(".pgm") if out.suffix else Path(str(out) + ".pgm"), x, 1.0)
    print(f"wrote {out}.grid")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    """Rewrite CSV columns as whitespace-separated data for gnuplot."""
    with open(args.csv, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError("empty CSV", args.csv)
    header, body = rows[0], rows[1:]
    cols = args.columns or header
    missing = [c for c in cols if c not in header]
    if missing:
        raise ConfigError(f"no column(s) {', '.join(missing)}", args.csv)
    idx = [header.index(c) for c in cols]
    lines = ["# " + " ".join(cols)]
    lines += [" ".join(r[i] if r[i] != "" else "nan" for i in idx) for r in body]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_show_config(args) -> int:
    sys.stdout.write(dumps(_load(args)))
    return EXIT_OK


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="partnorm", description="Domain-partitioned reconstruction toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run operator and factor self-checks")
    v.add_argument("config", nargs="?")
    v.add_argument("--filter", action="append", choices=SUITES, help="run only this suite (repeatable)")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fit-factor", help="fit the diagonal-circulant factor of the normal operator")
    f.add_argument("config")
    f.add_argument("--variant", choices=("plain", "sandwich"))
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit_factor)

    r = sub.add_parser("reconstruct", help="reconstruct from measurements")
    r.add_argument("config")
    r.add_argument("--method", choices=("adjoint", "gd", "tv", "unrolled", "two-step", "step1-only"))
    r.add_argument("--seed", type=int, help="override the experiment, phantom and noise seeds")
    r.add_argument("--K", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--publish", action="store_true", help="refuse to run unless verify passes")
    r.add_argument("--out")
    r.set_defaults(func=cmd_reconstruct)

    b = sub.add_parser("bench", help="timing and memory measurements")
    b.add_argument("config")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    ph = sub.add_parser("phantom", help="write a seeded phantom grid")
    ph.add_argument("kind", choices=KINDS)
    ph.add_argument("--shape", type=int, nargs="+", required=True)
    ph.add_argument("--seed", type=int, required=True)
    ph.add_argument("--out", required=True, help="output stem")
    ph.set_defaults(func=cmd_phantom)

    pd = sub.add_parser("plot-data", help="CSV columns as gnuplot data")
    pd.add_argument("csv")
    pd.add_argument("--columns", nargs="+")
    pd.add_argument("--out")
    pd.set_defaults(func=cmd_plot_data)

    sc = sub.add_parser("show-config", help="print the resolved configuration")
    sc.add_argument("config")
    sc.set_defaults(func=cmd_show_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CommandError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except (SolverError, FitDivergedError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # invalid shapes, extents or operator parameters reached from the config
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
