import numpy as np
import pytest

from partnorm.rng import SeededRng, as_rng, gaussian_probe


def test_same_seed_same_stream():
    assert np.array_equal(SeededRng(5).normal(10), SeededRng(5).normal(10))
    assert not np.array_equal(SeededRng(5).normal(10), SeededRng(6).normal(10))


def test_spawn_is_stable_in_count():
    a = SeededRng(3).spawn(2)[0].normal(4)
    b = SeededRng(3).spawn(7)[0].normal(4)
    assert np.array_equal(a, b)


def test_as_rng_passthrough():
    r = SeededRng(1)
    assert as_rng(r) is r
    assert isinstance(as_rng(2), SeededRng)


def test_complex_probe_moments():
    z = gaussian_probe((200, 200), SeededRng(0), complex_field=True)
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.02
    assert abs(np.mean(z * z)) < 0.02  # circular: E[z^2] = 0


def test_probe_rejects_empty():
    with pytest.raises(ValueError):
        gaussian_probe((0, 3), SeededRng(0))
