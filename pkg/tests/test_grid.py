import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from partnorm.grid import Grid, GridError, check_shape, load_grid, read_pgm, save_grid, write_pgm

shapes = st.lists(st.integers(1, 6), min_size=1, max_size=3).map(tuple)


@given(shapes, st.booleans(), st.integers(0, 2**31))
def test_roundtrip_is_exact(tmp_path_factory, shape, cplx, seed):
    g = np.random.default_rng(seed)
    x = g.standard_normal(shape)
    if cplx:
        x = x + 1j * g.standard_normal(shape)
    stem = tmp_path_factory.mktemp("g") / "x"
    save_grid(stem, x, peak=2.5)
    y, header = load_grid(stem, with_header=True)
    assert y.dtype == x.dtype and y.shape == shape
    assert np.array_equal(x, y)
    assert header["peak"] == 2.5
    assert header["field"] == ("complex" if cplx else "real")


def test_byte_layout(tmp_path):
    x = np.array([[1.0 + 2.0j, -3.0 + 0.5j]])
    raw, head = save_grid(tmp_path / "c", x)
    assert raw.read_bytes() == np.array([1.0, 2.0, -3.0, 0.5], dtype="<f8").tobytes()
    h = json.loads(head.read_text())
    assert h == {"field": "complex", "format": "partnorm-grid", "peak": 1.0, "shape": [1, 2], "version": 1}


def test_grid_is_immutable_copy():
    src = np.arange(6.0).reshape(2, 3)
    g = Grid(src)
    src[0, 0] = 99
    assert g.data[0, 0] == 0
    with pytest.raises(ValueError):
        g.data[0, 0] = 1.0
    assert g.field == "real" and g.shape == (2, 3)
    assert np.asarray(g).sum() == 15


def test_grid_save_load(tmp_path):
    g = Grid(np.ones((2, 2, 2)) * (1 + 1j), peak=3.0)
    g.save(tmp_path / "v")
    h = Grid.load(tmp_path / "v")
    assert h.peak == 3.0 and np.array_equal(h.data, g.data)


@pytest.mark.parametrize("shape", [(), (0, 3), (2, 2, 2, 2)])
def test_bad_shapes(shape):
    with pytest.raises(GridError):
        check_shape(shape)


def test_bad_peak():
    with pytest.raises(GridError):
        Grid(np.ones(3), peak=0.0)


def test_truncated_file(tmp_path):
    save_grid(tmp_path / "t", np.ones(4))
    (tmp_path / "t.grid").write_bytes(b"\0" * 8)
    with pytest.raises(GridError):
        load_grid(tmp_path / "t")


def test_pgm_roundtrip_and_clipping(tmp_path):
    img = np.array([[-1.0, 0.0], [0.5, 2.0]])
    p = write_pgm(tmp_path / "a.pgm", img, peak=1.0)
    back = read_pgm(p)
    assert np.allclose(back, [[0.0, 0.0], [0.5, 1.0]], atol=1 / 65535)
    assert p.read_bytes().startswith(b"P5\n2 2\n65535\n")


def test_pgm_rejects_complex(tmp_path):
    with pytest.raises(GridError):
        write_pgm(tmp_path / "a.pgm", np.ones((2, 2)) * 1j)
