import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from partnorm.linop import ConvOperator, MatrixOperator, Radon2D, gaussian_kernel, uniform_angles
from partnorm.partition import schedule_patches
from partnorm.rng import SeededRng
from partnorm.solvers import (
    DataStep,
    GaussianSmooth,
    IdentityPrior,
    SolverError,
    TVProx,
    apply_patchwise,
    conjugate_gradient,
    factor_step_size,
    fista_tv,
    grad,
    grad_adjoint,
    gradient_descent,
    measure_peak,
    normalized_adjoint,
    prior_from_spec,
    step_size,
    total_variation,
    tv_prox,
    two_step_partitioned,
    unrolled_pgd,
)
from partnorm.spectral import DiagCirculantFactor

from conftest import rel


def spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.normal((n, n)))
    return Q @ np.diag(np.linspace(1.0, cond, n)) @ Q.T


def test_cg_solves_spd_system():
    rng = SeededRng(0)
    M = spd(rng, 20)
    b = rng.normal(20)
    x, report = conjugate_gradient(lambda v: M @ v, b, tol=1e-12)
    assert rel(x, np.linalg.solve(M, b)) < 1e-10
    assert report.status == "ok" and report.iterations <= 20


def test_cg_complex_hermitian():
    rng = SeededRng(1)
    B = rng.normal((8, 8)) + 1j * rng.normal((8, 8))
    M = B.conj().T @ B + np.eye(8)
    b = rng.normal(8) + 1j * rng.normal(8)
    x, _ = conjugate_gradient(lambda v: M @ v, b, tol=1e-12)
    assert rel(x, np.linalg.solve(M, b)) < 1e-9


def test_cg_breakdown_and_max_iters():
    with pytest.raises(SolverError) as err:
        conjugate_gradient(lambda v: -v, np.ones(3))
    assert err.value.report.status == "breakdown"
    M = spd(SeededRng(2), 30, cond=1e4)
    _, report = conjugate_gradient(lambda v: M @ v, np.ones(30), max_iters=3)
    assert report.status == "max_iters"
    x, _ = conjugate_gradient(lambda v: M @ v, np.zeros(30))
    assert not x.any()


@given(st.lists(st.integers(2, 7), min_size=1, max_size=3), st.integers(0, 1000))
def test_grad_adjoint_is_adjoint(shape, seed):
    rng = SeededRng(seed)
    u = rng.normal(tuple(shape))
    p = rng.normal((len(shape),) + tuple(shape))
    assert np.vdot(grad(u), p) == pytest.approx(np.vdot(u, grad_adjoint(p)), abs=1e-10)


def test_total_variation_known_value():
    u = np.zeros((4, 4))
    u[:, 2:] = 1.0
    # one vertical jump of height 1 across four rows
    assert total_variation(u) == pytest.approx(4.0)


def test_tv_prox_properties():
    rng = SeededRng(3)
    v = rng.normal((16, 16))
    assert np.array_equal(tv_prox(v, 0.0), v)
    u = tv_prox(v, 0.5, 200)
    assert total_variation(u) < total_variation(v)
    assert u.mean() == pytest.approx(v.mean(), abs=1e-12)
    # optimality beats perturbed candidates
    def obj(w):
        return 0.5 * np.sum((w - v) ** 2) + 0.5 * total_variation(w)
    for _ in range(5):
        assert obj(u) <= obj(u + 1e-2 * rng.normal(v.shape)) + 1e-9
    # constants are fixed points
    assert rel(tv_prox(np.full((5, 5), 2.0), 1.0), np.full((5, 5), 2.0)) < 1e-14


def test_priors():
    x = SeededRng(4).normal((12, 12))
    assert IdentityPrior()(x) is x
    assert np.array_equal(GaussianSmooth(0.0, 0.5)(x), x)
    y = GaussianSmooth(1.0, 1.0)(x)
    assert y.std() < x.std()
    z = GaussianSmooth(1.0, 0.5)(x + 1j * x)
    assert rel(z.real, z.imag) < 1e-14
    assert isinstance(prior_from_spec({"kind": "tv", "weight": 0.1}), TVProx)
    assert isinstance(prior_from_spec(None), IdentityPrior)
    with pytest.raises(ValueError):
        prior_from_spec({"kind": "wavelet"})
    with pytest.raises(ValueError):
        prior_from_spec({"kind": "gaussian", "width": 2})
    with pytest.raises(ValueError):
        GaussianSmooth(1.0, 2.0)


def test_apply_patchwise_pointwise_prior_is_exact():
    class Scale(IdentityPrior):
        def __call__(self, x):
            return 2.0 * x

    x = SeededRng(5).normal((10, 10))
    assert rel(apply_patchwise(Scale(), x, schedule_patches(x.shape, 4, 3)), 2 * x) < 1e-15


def problem(seed=0):
    A = Radon2D(16, uniform_angles(12))
    x = SeededRng(seed).uniform(size=(16, 16))
    return A, x, A.apply(x)


def test_gd_with_K_zero_returns_x0():
    A, _, y = problem()
    x0 = normalized_adjoint(A, y)
    x, report = gradient_descent(DataStep.exact(A, y), x0, 0)
    assert np.array_equal(x, x0) and report.iterations == 0
    with pytest.raises(ValueError):
        unrolled_pgd(DataStep.exact(A, y), IdentityPrior(), x0, -1)


def test_gd_decreases_residual():
    A, _, y = problem()
    _, report = gradient_descent(DataStep.exact(A, y), np.zeros((16, 16)), 30)
    assert all(b <= a + 1e-12 for a, b in zip(report.residuals, report.residuals[1:]))


def test_divergence_guard():
    A, _, y = problem()
    with pytest.raises(SolverError) as err:
        gradient_descent(DataStep.exact(A, y, eta=100.0), np.zeros((16, 16)), 50)
    assert err.value.report.status == "diverged"
    with pytest.raises(ValueError):
        DataStep.exact(A, y, eta=-1.0)


def test_step_size_from_spectral_norm():
    M = np.diag([3.0, 1.0, 0.5])
    assert step_size(MatrixOperator(M, (3,), (3,))) == pytest.approx(1 / 9, rel=1e-6)


def test_factor_step_size():
    H = DiagCirculantFactor(np.full(4, 2.0), np.array([4.0, 1, 1, 1]))
    assert factor_step_size(H) == pytest.approx(1 / 8)
    S = DiagCirculantFactor(np.full(4, 2.0), np.array([4.0, 1, 1, 1]), "sandwich")
    assert factor_step_size(S) == pytest.approx(1 / 16)
    with pytest.raises(ValueError):
        factor_step_size(DiagCirculantFactor(np.zeros(4), np.ones(4)))


def test_normalized_adjoint_scalar_is_optimal():
    A, _, y = problem()
    z = A.adjoint(y)
    x = normalized_adjoint(A, y)
    c = np.vdot(x, z) / np.vdot(z, z)
    base = np.linalg.norm(A.apply(x) - y)
    for d in (0.99, 1.01):
        assert np.linalg.norm(A.apply(d * c * z) - y) >= base


def test_fista_objective_decreases_overall():
    A, x_true, y = problem()
    x, report = fista_tv(A, y, 0.05, 60, reference=x_true)
    obj = report.extra["objective"]
    assert obj[-1] < obj[0]
    assert len(report.psnr) == 60


def test_two_step_exact_context_is_fixed_point():
    # with the true volume as context and CG, every patch recovers the truth
    A = ConvOperator(gaussian_kernel(3, 0.7, 2), (12, 12))
    x = SeededRng(6).uniform(size=(12, 12))
    y = A.apply(x)
    H = DiagCirculantFactor(np.ones((12, 12)), np.abs(A.spectrum) ** 2)
    sched = schedule_patches((12, 12), 6, 3)
    out, report = two_step_partitioned(A, y, sched, K=2, factor=H, context=x, sub_solver="cg", cg_tol=1e-13)
    assert rel(out, x) < 1e-9
    assert report.extra["context_source"] == "provided"


def test_two_step_threads_match_serial():
    A, x, y = problem(1)
    sched = schedule_patches((16, 16), 8, 4)
    kw = dict(K=5, normal_path="exact", prior=GaussianSmooth(1.0, 0.1))
    a, _ = two_step_partitioned(A, y, sched, threads=1, **kw)
    b, _ = two_step_partitioned(A, y, sched, threads=3, **kw)
    assert np.array_equal(a, b)


def test_two_step_requires_factor_on_factor_path():
    A, _, y = problem()
    with pytest.raises(ValueError):
        two_step_partitioned(A, y, schedule_patches((16, 16), 8, 8))


def test_measure_peak_sees_numpy_buffers():
    _, peak = measure_peak(lambda: np.ones(1_000_000).sum())
    assert 8_000_000 <= peak < 9_000_000
