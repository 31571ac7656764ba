import numpy as np
import pytest

from partnorm.phantoms import blobs_3d, make_phantom, piecewise_constant_1d, shepp_logan_like


@pytest.mark.parametrize("kind,shape", [("shepp-logan", (48, 48)), ("blobs", (8, 10, 12)), ("piecewise", (50,))])
def test_range_and_determinism(kind, shape):
    a = make_phantom(kind, shape, 3)
    b = make_phantom(kind, shape, 3)
    assert a.shape == shape
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_seeds_differ():
    assert not np.array_equal(shepp_logan_like(32, 0), shepp_logan_like(32, 1))
    assert not np.array_equal(blobs_3d((6, 6, 6), 0), blobs_3d((6, 6, 6), 1))
    assert not np.array_equal(piecewise_constant_1d(40, 0), piecewise_constant_1d(40, 1))


def test_unseeded_shepp_logan_is_classic():
    img = shepp_logan_like(64)
    assert img.max() == 1.0
    # outside the head is empty
    assert img[0, 0] == 0.0 and img[32, 0] == 0.0


def test_bad_requests():
    with pytest.raises(ValueError):
        make_phantom("shepp-logan", (8, 9), 0)
    with pytest.raises(ValueError):
        make_phantom("nope", (8,), 0)
