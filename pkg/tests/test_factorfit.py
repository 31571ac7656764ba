import numpy as np
import pytest

from partnorm.factorfit import (
    FitConfig,
    FitDivergedError,
    fit_factor,
    frobenius_oracle,
    initial_factor,
    loss_and_grad,
    monte_carlo_loss,
)
from partnorm.linop import ConvOperator, MatrixOperator, NormalOperator, dense_matrix, gaussian_kernel
from partnorm.rng import SeededRng
from partnorm.spectral import PLAIN, SANDWICH, DiagCirculantFactor
from partnorm.verify import factor_matrix

from conftest import rel


def dense_loss(m, lam, T, probes, variant):
    M = factor_matrix(DiagCirculantFactor(m, lam, variant))
    return np.mean([np.sum(np.abs(M @ x.ravel() - T @ x.ravel()) ** 2) for x in probes])


def fd_grad(m, lam, T, probes, variant, which, h=1e-6):
    param = m if which == "m" else lam
    g = np.zeros(param.shape, dtype=complex)
    for idx in np.ndindex(param.shape):
        for unit in ((1.0, 1j) if np.iscomplexobj(param) else (1.0,)):
            up, dn = param.copy(), param.copy()
            up[idx] += h * unit
            dn[idx] -= h * unit
            args_up = (up, lam) if which == "m" else (m, up)
            args_dn = (dn, lam) if which == "m" else (m, dn)
            d = (dense_loss(*args_up, T, probes, variant) - dense_loss(*args_dn, T, probes, variant)) / (2 * h)
            g[idx] += d * unit
    return g


@pytest.mark.parametrize("variant", [PLAIN, SANDWICH])
def test_gradients_match_central_differences(variant):
    rng = SeededRng(7)
    shape = (3, 4)
    n = 12
    B = rng.normal((n, n)) + 1j * rng.normal((n, n))
    T = B.conj().T @ B / n
    m = rng.normal(shape) + 1j * rng.normal(shape)
    lam = rng.normal(shape) + 1j * rng.normal(shape)
    probes = [rng.normal(shape) + 1j * rng.normal(shape) for _ in range(2)]
    target = MatrixOperator(T, shape, shape)
    loss, gm, gl = loss_and_grad(m, lam, target, probes, variant)
    assert loss == pytest.approx(dense_loss(m, lam, T, probes, variant), rel=1e-12)
    assert rel(gm, fd_grad(m, lam, T, probes, variant, "m")) < 1e-6
    assert rel(gl, fd_grad(m, lam, T, probes, variant, "lam")) < 1e-6


def test_real_m_gets_real_gradient():
    rng = SeededRng(1)
    shape = (5,)
    T = rng.normal((5, 5))
    T = T.T @ T
    m = rng.normal(shape)
    lam = np.fft.fftn(rng.normal(shape))
    probes = [rng.normal(shape)]
    _, gm, _ = loss_and_grad(m, lam, MatrixOperator(T, shape, shape), probes, PLAIN)
    ref = fd_grad(m, lam, T, probes, PLAIN, "m")
    assert rel(gm.real, ref.real) < 1e-6


def test_monte_carlo_agrees_with_oracle():
    rng = SeededRng(0)
    target = NormalOperator(ConvOperator(gaussian_kernel(3, 1.0, 2), (8, 8)))
    H = DiagCirculantFactor(1 + 0.3 * rng.normal((8, 8)), np.ones((8, 8)))
    mc, se = monte_carlo_loss(target, H, 400, SeededRng(1))
    oracle = frobenius_oracle(target, H)
    ref = np.sum(np.abs(dense_matrix(target) - factor_matrix(H)) ** 2)
    assert oracle == pytest.approx(ref, rel=1e-12)
    assert abs(mc - oracle) < 4 * se


def test_exact_start_is_kept():
    # the impulse initialization already reproduces a circulant normal operator
    target = NormalOperator(ConvOperator(gaussian_kernel(5, 1.0, 2), (12, 12)))
    H, trace = fit_factor(target, FitConfig(steps=20, seed=0))
    assert trace.oracle_loss < 1e-20
    assert trace.extra["best_step"] == 0


def test_fit_reduces_loss_for_nonstationary_target():
    rng = SeededRng(3)
    w = 1 + 0.5 * rng.uniform(size=(10, 10))
    A = ConvOperator(gaussian_kernel(3, 1.0, 2), (10, 10))
    target = MatrixOperator(np.diag(w.ravel()) @ dense_matrix(NormalOperator(A)), (10, 10), (10, 10))
    cfg = FitConfig(steps=300, seed=0)
    H0 = initial_factor(target, cfg)
    H, trace = fit_factor(target, cfg)
    assert trace.oracle_loss < 0.2 * frobenius_oracle(target, H0)
    assert trace.final_loss == min(trace.losses)


def test_fit_is_deterministic():
    target = NormalOperator(ConvOperator(gaussian_kernel(3, 0.8, 1), (16,)))
    a, _ = fit_factor(target, FitConfig(steps=30, seed=5, init="identity"))
    b, _ = fit_factor(target, FitConfig(steps=30, seed=5, init="identity"))
    assert np.array_equal(a.lam, b.lam) and np.array_equal(a.m, b.m)


def test_divergence_raises_with_trace():
    target = NormalOperator(ConvOperator(gaussian_kernel(3, 0.8, 1), (16,)))
    with pytest.raises(FitDivergedError) as err:
        fit_factor(target, FitConfig(steps=200, lr=1e3, optimizer="gd", init="identity"))
    assert len(err.value.trace.losses) >= 1


@pytest.mark.parametrize("kwargs", [{"steps": 0}, {"lr": 0.0}, {"optimizer": "sgd"}, {"init": "x"}, {"variant": "y"}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        FitConfig(**kwargs)


def test_non_square_target_rejected():
    with pytest.raises(ValueError):
        fit_factor(MatrixOperator(np.ones((3, 2)), (2,), (3,)))
