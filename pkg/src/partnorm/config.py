"""Experiment configuration.

One TOML file per experiment.  Section names follow the package modules
(``linop``, ``factorfit``, ``partition``, ``solvers``) plus ``experiment``,
``phantom``, ``verify`` and ``bench``.  Every key is checked against a
schema: unknown sections or keys, wrong types and missing seeds are hard
errors raised as :class:`ConfigError`, which carries a ``section.key``
location (or a line/column for syntax errors).
"""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


def _intlist(v):
    return isinstance(v, list) and all(isinstance(i, int) and not isinstance(i, bool) for i in v)


def _floatlist(v):
    return isinstance(v, list) and all(isinstance(i, (int, float)) and not isinstance(i, bool) for i in v)


def _check(kind, v) -> bool:
    if kind is int:
        return isinstance(v, int) and not isinstance(v, bool)
    if kind is float:
        return isinstance(v, (int, float)) and not isinstance(v, bool)
    if kind == "intlist":
        return _intlist(v)
    if kind == "floatlist":
        return _floatlist(v)
    if kind == "int-or-list":
        return _check(int, v) or _intlist(v)
    if kind == "float-or-none":
        return v is None or _check(float, v)
    if kind == "strlist":
        return isinstance(v, list) and all(isinstance(i, str) for i in v)
    return isinstance(v, kind)


# section -> key -> (type, default, allowed values or None)
SCHEMA: dict[str, dict[str, tuple]] = {
    "experiment": {
        "name": (str, "experiment", None),
        "seed": (int, REQUIRED, None),
        "output": (str, "out", None),
        "noise_sigma": (float, 0.0, None),
        "noise_relative": (bool, True, None),
        "peak": (float, 1.0, None),
        "per_slice": (bool, False, None),
        "slice_axis": (int, 0, None),
        "require_verified": (bool, False, None),
        "measurements": (str, "", None),
        "reference": (str, "", None),
    },
    "phantom": {
        "kind": (str, "shepp-logan", ("shepp-logan", "blobs", "piecewise")),
        "shape": ("intlist", [64, 64], None),
        "seed": (int, REQUIRED, None),
    },
    "linop": {
        "kind": (str, "radon", ("radon", "conv", "mask", "mri")),
        "n_angles": (int, 30, None),
        "arc": (float, 3.141592653589793, None),
        "angles": ("floatlist", [], None),
        "det_count": (int, 0, None),
        "det_spacing": (float, 1.0, None),
        "kernel_size": (int, 5, None),
        "kernel_sigma": (float, 1.0, None),
        "keep_fraction": (float, 0.5, None),
        "coils": (int, 1, None),
        "coil_width": (float, 0.6, None),
        "acceleration": (float, 4.0, None),
        "center_fraction": (float, 0.08, None),
        "fft_axes": ("intlist", [], None),
        "seed": (int, REQUIRED, None),
    },
    "factorfit": {
        "steps": (int, 3000, None),
        "batch": (int, 4, None),
        "lr": ("float-or-none", None, None),
        "optimizer": (str, "amsgrad", ("adam", "amsgrad", "gd")),
        "beta1": (float, 0.9, None),
        "beta2": (float, 0.999, None),
        "eps": (float, 1e-8, None),
        "seed": (int, REQUIRED, None),
        "init": (str, "impulse", ("impulse", "identity")),
        "variant": (str, "auto", ("auto", "plain", "sandwich")),
        "divergence_factor": (float, 1e6, None),
        "keep_best": (bool, True, None),
        "mc_probes": (int, 100, None),
    },
    "partition": {
        "extents": ("int-or-list", 32, None),
        "stride": ("int-or-list", 16, None),
        "step1_extents": ("int-or-list", 0, None),
        "step1_stride": ("int-or-list", 0, None),
        "aggregation": (str, "mean", ("mean",)),
    },
    "solvers": {
        "method": (str, "two-step", ("adjoint", "gd", "tv", "unrolled", "two-step", "step1-only")),
        "K": (int, 30, None),
        "K2": (int, 0, None),
        "eta": ("float-or-none", None, None),
        "x0": (str, "normalized-adjoint", ("normalized-adjoint", "adjoint", "zero")),
        "prior": (dict, {"kind": "gaussian", "sigma": 1.0, "weight": 0.01}, None),
        "normal_path": (str, "exact", ("exact", "factor")),
        "factor": (str, "", None),
        "refine": (str, "auto", ("auto", "yes", "no")),
        "sub_solver": (str, "pgd", ("pgd", "cg")),
        "tv_lambda": (float, 2.0, None),
        "tv_relative": (bool, True, None),
        "tv_iters": (int, 300, None),
        "tv_inner": (int, 20, None),
        "threads": (int, 1, None),
    },
    "verify": {
        "suites": ("strlist", [], None),
        "dot_pairs": (int, 100, None),
        "dot_tol": (float, 1e-10, None),
        "oracle_tol": (float, 1e-10, None),
        "exact_triples": (int, 30, None),
        "exact_tol": (float, 1e-12, None),
        "mc_probes": ("intlist", [100, 1000, 10000], None),
        "mc_sigmas": (float, 3.0, None),
        "grad_instances": (int, 20, None),
        "grad_tol": (float, 1e-5, None),
        "seed": (int, REQUIRED, None),
    },
    "bench": {
        "sizes": ("intlist", [32, 48, 64], None),
        "angles": ("intlist", [15, 30, 60, 120], None),
        "patch": (int, 16, None),
        "repeats": (int, 3, None),
        "memory_cap_bytes": (int, 2_000_000_000, None),
        "seed": (int, REQUIRED, None),
    },
}

@dataclass
class ExperimentConfig:
    sections: dict[str, dict] = field(default_factory=dict)
    source: str | None = None

    def __getitem__(self, name: str) -> dict:
        return self.sections[name]

    def __contains__(self, name: str) -> bool:
        return name in self.sections

    def get(self, name: str) -> dict | None:
        return self.sections.get(name)

    @property
    def seed(self) -> int:
        return self.sections["experiment"]["seed"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.sections)

    def hash(self) -> str:
        """SHA-256 of the resolved configuration (defaults filled in)."""
        blob = json.dumps(self.sections, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **sections) -> "ExperimentConfig":
        """Return a copy with ``section={key: value}`` updates, re-validated."""
        raw = self.to_dict()
        for name, upd in sections.items():
            raw.setdefault(name, {}).update(upd)
        return from_dict(raw, self.source)


def _resolve_section(name: str, raw, experiment_seed) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("must be a table", name)
    schema = SCHEMA[name]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}", name)
    out = {}
    for key, (kind, default, allowed) in schema.items():
        where = f"{name}.{key}"
        if key in raw:
            value = raw[key]
            if not _check(kind, value):
                raise ConfigError(f"bad type {type(value).__name__}", where)
            if kind is float and value is not None:
                value = float(value)
        elif default is REQUIRED:
            # section seeds fall back to the experiment seed, which itself is mandatory
            if key == "seed" and name != "experiment" and experiment_seed is not None:
                value = experiment_seed
            else:
                raise ConfigError("missing required key", where)
        else:
            value = copy.deepcopy(default)
        if allowed is not None and value not in allowed:
            raise ConfigError(f"{value!r} not one of {', '.join(allowed)}", where)
        out[key] = value
    return out


def from_dict(raw: dict, source: str | None = None) -> ExperimentConfig:
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown section(s) {', '.join(unknown)}")
    exp_raw = raw.get("experiment", {})
    if not isinstance(exp_raw, dict):
        raise ConfigError("must be a table", "experiment")
    experiment = _resolve_section("experiment", exp_raw, None)
    sections = {"experiment": experiment}
    for name in SCHEMA:
        if name == "experiment":
            continue
        if name in raw:
            sections[name] = _resolve_section(name, raw[name], experiment["seed"])
    _cross_checks(sections)
    return ExperimentConfig(sections, source)


def _cross_checks(sections: dict) -> None:
    exp = sections["experiment"]
    if exp["noise_sigma"] < 0:
        raise ConfigError("must be >= 0", "experiment.noise_sigma")
    if exp["peak"] <= 0:
        raise ConfigError("must be > 0", "experiment.peak")
    sol = sections.get("solvers")
    if sol is not None:
        if sol["K"] < 0 or sol["K2"] < 0:
            raise ConfigError("iteration counts must be >= 0", "solvers.K")
        if sol["threads"] < 1:
            raise ConfigError("must be >= 1", "solvers.threads")
        prior = sol["prior"]
        if prior.get("kind") not in ("identity", "gaussian", "tv"):
            raise ConfigError(f"unknown prior kind {prior.get('kind')!r}", "solvers.prior")
    lin = sections.get("linop")
    if lin is not None and lin["kind"] != "radon" and "phantom" not in sections and not exp["measurements"]:
        raise ConfigError("needs a [phantom] section to fix the volume shape", "linop")


def loads(text: str, source: str | None = None) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message already names line and column
        raise ConfigError(str(exc), source) from None
    return from_dict(raw, source)


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    cfg = loads(text, str(path))
    check_paths(cfg, path.parent)
    return cfg


def check_paths(cfg: ExperimentConfig, base: Path) -> None:
    """Every referenced input must exist when the run starts."""
    exp = cfg["experiment"]
    refs = [("experiment.measurements", exp["measurements"]), ("experiment.reference", exp["reference"])]
    if "solvers" in cfg:
        refs.append(("solvers.factor", cfg["solvers"]["factor"]))
    for where, value in refs:
        if not value:
            continue
        p = Path(value)
        if not p.is_absolute():
            p = base / p
        # grid inputs are given by stem
        if not (p.exists() or Path(str(p) + ".grid").exists()):
            raise ConfigError(f"referenced path {value!r} does not exist", where)


def resolve_path(cfg: ExperimentConfig, value: str) -> Path:
    p = Path(value)
    if p.is_absolute() or cfg.source is None:
        return p
    return Path(cfg.source).parent / p


def dumps(cfg: ExperimentConfig) -> str:
    """Serialize the resolved configuration back to TOML."""
    lines = []
    for name, sec in cfg.sections.items():
        lines.append(f"[{name}]")
        for key, value in sec.items():
            if value is None:
                continue
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(i) for i in v) + "]"
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(i)}" for k, i in v.items()) + " }"
    raise TypeError(f"cannot write {type(v).__name__} to TOML")
