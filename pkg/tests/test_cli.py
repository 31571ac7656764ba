import csv
from pathlib import Path

import numpy as np
import pytest

from partnorm import cli
from partnorm.grid import load_grid
from partnorm.linop import MaskOperator

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
[experiment]
name = "small"
seed = 1
noise_sigma = 0.02

[phantom]
kind = "shepp-logan"
shape = [24, 24]

[linop]
kind = "radon"
n_angles = 12

[factorfit]
steps = 40

[partition]
extents = 12
stride = 6

[solvers]
method = "gd"
K = 5
eta = {eta}
"""


def small(tmp_path, eta="0.01"):
    p = tmp_path / "small.toml"
    p.write_text(SMALL.format(eta=eta))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_verify_passes(tmp_path, capsys):
    assert cli.main(["verify", str(CONFIGS / "verify.toml"), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "verify.csv")
    assert {r["suite"] for r in rows} == {"adjoint", "dense-oracle", "patch-exactness", "monte-carlo", "gradients"}
    assert all(r["status"] == "pass" for r in rows)


def test_verify_filter(tmp_path):
    assert cli.main(["verify", "--filter", "patch-exactness", "--out", str(tmp_path)]) == 0
    assert {r["suite"] for r in read_csv(tmp_path / "verify.csv")} == {"patch-exactness"}


def test_verify_catches_broken_adjoint(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(MaskOperator, "_adjoint", lambda self, y: 2.0 * self.mask * y)
    code = cli.main(["verify", "--filter", "adjoint", "--out", str(tmp_path)])
    assert code == 1
    assert "adjoint" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('[experiment]\nseed = 0\n[linop]\nkind = "radon"\nn_angles = "many"\n')
    assert cli.main(["reconstruct", str(p)]) == 2
    assert "linop.n_angles" in capsys.readouterr().err


def test_diverging_solver_exits_3(tmp_path, capsys):
    code = cli.main(["reconstruct", small(tmp_path, eta="50.0"), "--K", "60", "--out", str(tmp_path)])
    assert code == 3
    assert "diverged" in capsys.readouterr().err
    assert (tmp_path / "small-gd-s1.report.csv").exists()


def test_K_zero_returns_initial_guess(tmp_path):
    cfg = small(tmp_path)
    assert cli.main(["reconstruct", cfg, "--K", "0", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["reconstruct", cfg, "--method", "adjoint", "--out", str(tmp_path / "b")]) == 0
    a = load_grid(tmp_path / "a" / "small-gd-s1")
    b = load_grid(tmp_path / "b" / "small-adjoint-s1")
    assert np.array_equal(a, b)


def test_reconstruct_artifacts(tmp_path):
    out = tmp_path / "r"
    assert cli.main(["reconstruct", small(tmp_path), "--method", "two-step", "--seed", "4", "--out", str(out)]) == 0
    stem = out / "small-two-step-s4"
    for suffix in (".grid", ".grid.json", ".pgm", ".report.csv", ".timing.csv", ".metrics.csv", ".json"):
        assert Path(str(stem) + suffix).exists(), suffix
    stages = [r["stage"] for r in read_csv(str(stem) + ".metrics.csv")]
    assert stages == ["step1", "step2"]
    assert Path(str(stem) + ".pgm").read_bytes().startswith(b"P5")


def test_fit_factor_is_reproducible(tmp_path):
    cfg = small(tmp_path)
    for d in ("a", "b"):
        assert cli.main(["fit-factor", cfg, "--variant", "sandwich", "--out", str(tmp_path / d)]) == 0
    for name in ("factor/m.grid", "factor/lambda.grid", "factor/factor.json", "fit_trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert '"variant": "sandwich"' in (tmp_path / "a" / "factor" / "factor.json").read_text()


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("PARTNORM_OUTPUT", str(tmp_path / "env"))
    monkeypatch.setenv("PARTNORM_THREADS", "2")
    assert cli.main(["reconstruct", small(tmp_path), "--K", "1"]) == 0
    assert (tmp_path / "env" / "small-gd-s1.grid").exists()
    # the flag wins over the environment
    assert cli.main(["reconstruct", small(tmp_path), "--K", "1", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "small-gd-s1.grid").exists()


def test_publish_gate_runs_verify(tmp_path, monkeypatch):
    monkeypatch.setattr(MaskOperator, "_adjoint", lambda self, y: 2.0 * self.mask * y)
    assert cli.main(["reconstruct", small(tmp_path), "--publish", "--out", str(tmp_path)]) == 1
    assert not (tmp_path / "small-gd-s1.grid").exists()


def test_phantom_and_plot_data(tmp_path, capsys):
    assert cli.main(["phantom", "shepp-logan", "--shape", "16", "16", "--seed", "2", "--out", str(tmp_path / "ph")]) == 0
    assert load_grid(tmp_path / "ph").shape == (16, 16)
    assert (tmp_path / "ph.pgm").exists()
    csv_path = tmp_path / "t.csv"
    csv_path.write_text("iteration,residual,psnr\n1,0.5,\n2,0.25,30.0\n")
    capsys.readouterr()
    assert cli.main(["plot-data", str(csv_path), "--columns", "iteration", "psnr"]) == 0
    assert capsys.readouterr().out == "# iteration psnr\n1 nan\n2 30.0\n"
    assert cli.main(["plot-data", str(csv_path), "--columns", "ssim"]) == 2


def test_show_config(tmp_path, capsys):
    assert cli.main(["show-config", small(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[solvers]" in out and "tv_lambda" in out
