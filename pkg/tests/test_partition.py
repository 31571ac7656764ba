import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from partnorm.linop import ConvOperator, Radon2D, dense_matrix, dot_test, gaussian_kernel, uniform_angles
from partnorm.partition import (
    PartitionError,
    ReducedOperator,
    Selection,
    aggregate,
    axis_origins,
    build_subproblem,
    schedule_patches,
)
from partnorm.rng import SeededRng
from partnorm.spectral import DiagCirculantFactor

from conftest import rel


@st.composite
def selection(draw, max_dim=3):
    d = draw(st.integers(1, max_dim))
    shape = tuple(draw(st.integers(1, 8)) for _ in range(d))
    extents = tuple(draw(st.integers(1, n)) for n in shape)
    origin = tuple(draw(st.integers(0, n - p)) for n, p in zip(shape, extents))
    return Selection(shape, origin, extents)


@given(selection(), st.integers(0, 1000))
def test_extract_embed_adjoint(S, seed):
    rng = SeededRng(seed)
    x, u = rng.normal(S.volume_shape), rng.normal(S.extents)
    assert np.vdot(S.extract(x), u) == pytest.approx(np.vdot(x, S.embed(u)), abs=1e-10)
    assert np.array_equal(S.extract(S.embed(u)), u)


@given(selection(), st.integers(0, 1000))
def test_decomposition_identity(S, seed):
    # x = S^T S x + S_perp^T S_perp x, exactly
    x = SeededRng(seed).normal(S.volume_shape)
    assert np.array_equal(S.embed(S.extract(x)) + S.zero_patch(x), x)
    assert np.array_equal(S.embed_complement(S.extract_complement(x)), S.zero_patch(x))


def test_reduced_operator_matches_column_selection():
    A = Radon2D(6, uniform_angles(4))
    S = Selection((6, 6), (1, 2), (3, 4))
    R = ReducedOperator(A, S)
    cols = np.flatnonzero(S.embed(np.ones(S.extents)).ravel())
    assert rel(dense_matrix(R), A.matrix.toarray()[:, cols]) < 1e-14
    assert dot_test(R, SeededRng(0)) < 1e-12


def test_subproblem_reproduces_data_when_context_is_truth():
    rng = SeededRng(1)
    A = ConvOperator(gaussian_kernel(3, 1.0, 2), (8, 8))
    x = rng.normal((8, 8))
    y = A.apply(x)
    S = Selection((8, 8), (2, 3), (4, 4))
    sub = build_subproblem(A, y, x, S)
    # the patch region of the context is ignored
    junk = x.copy()
    junk[S.slices] = 1e3
    sub2 = build_subproblem(A, y, junk, S)
    assert np.array_equal(sub.data, sub2.data)
    assert sub.residual(S.extract(x)) < 1e-12
    assert rel(sub.rhs, S.extract(A.adjoint(sub.data))) < 1e-14
    with pytest.raises(PartitionError):
        sub.normal(S.extract(x), "factor")


def test_subproblem_factor_normal():
    A = ConvOperator(gaussian_kernel(3, 1.0, 2), (8, 8))
    H = DiagCirculantFactor(np.ones((8, 8)), np.abs(A.spectrum) ** 2)
    S = Selection((8, 8), (5, 0), (3, 6))
    x = SeededRng(2).normal((8, 8))
    sub = build_subproblem(A, A.apply(x), x, S, H)
    u = SeededRng(3).normal(S.extents)
    assert rel(sub.normal(u, "factor").real, sub.normal(u, "exact")) < 1e-12


def test_axis_origins_clamp():
    assert axis_origins(10, 4, 3) == [0, 3, 6]
    assert axis_origins(11, 4, 3) == [0, 3, 6, 7]
    assert axis_origins(4, 4, 2) == [0]


@given(st.lists(st.integers(1, 12), min_size=1, max_size=3), st.data())
def test_schedule_covers_volume(shape, data):
    extents = [data.draw(st.integers(1, n)) for n in shape]
    stride = [data.draw(st.integers(1, p)) for p in extents]
    sched = schedule_patches(tuple(shape), tuple(extents), tuple(stride))
    assert (sched.coverage() >= 1).all()
    for S in sched:
        assert S.extents == tuple(extents)


def test_aggregate_mean_and_passthrough():
    sched = schedule_patches((6,), 4, 2)
    results = [np.full(4, 1.0), np.full(4, 3.0)]
    out = aggregate(sched, results)
    assert np.array_equal(out, [1, 1, 2, 2, 3, 3])
    # voxels seen once are copied bit-for-bit
    vals = SeededRng(0).normal(6)
    out = aggregate(sched, [S.extract(vals) for S in sched])
    assert np.array_equal(out[:2], vals[:2]) and np.array_equal(out[4:], vals[4:])
    assert np.allclose(out, vals)


def test_aggregate_exact_for_consistent_patches():
    x = SeededRng(1).normal((9, 7))
    sched = schedule_patches(x.shape, (4, 3), (3, 2))
    assert np.allclose(aggregate(sched, [S.extract(x) for S in sched]), x, rtol=0, atol=1e-15)


def test_errors():
    with pytest.raises(PartitionError):
        Selection((5, 5), (3, 0), (3, 2))
    with pytest.raises(PartitionError):
        Selection((5, 5), (0,), (2, 2))
    S = Selection((5, 5), (0, 0), (2, 2))
    with pytest.raises(PartitionError):
        S.extract(np.ones((4, 5)))
    with pytest.raises(PartitionError):
        S.embed(np.ones((2, 3)))
    with pytest.raises(PartitionError):
        schedule_patches((5,), 6, 1)
    with pytest.raises(PartitionError):
        schedule_patches((5,), 2, 0)
    with pytest.raises(PartitionError):
        schedule_patches((5,), 2, 1, aggregation="median")
    sched = schedule_patches((5,), 2, 1)
    with pytest.raises(PartitionError):
        aggregate(sched, [np.ones(2)])
