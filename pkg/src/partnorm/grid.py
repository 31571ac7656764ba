"""Grid container and its on-disk format.

A grid is stored as two files: ``<stem>.grid`` holds the samples as a flat
little-endian float64 buffer in row-major order (complex samples interleaved
as ``re, im`` pairs) and ``<stem>.grid.json`` holds the header::

    {"format": "partnorm-grid", "version": 1, "shape": [...],
     "field": "real" | "complex", "peak": 1.0}

Inside the library grids are plain numpy arrays; :class:`Grid` only adds the
validation and the metadata needed for serialization.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_NAME = "partnorm-grid"
FORMAT_VERSION = 1


class GridError(ValueError):
    pass


def check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if not 1 <= len(shape) <= 3:
        raise GridError(f"grids have 1 to 3 dimensions, got shape {shape}")
    if any(s < 1 for s in shape):
        raise GridError(f"all extents must be >= 1, got shape {shape}")
    return shape


def field_of(x) -> str:
    return "complex" if np.iscomplexobj(x) else "real"


@dataclass(frozen=True)
class Grid:
    """Immutable d-dimensional sample array (d <= 3) with a declared peak."""

    data: np.ndarray
    peak: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.data)
        check_shape(arr.shape)
        dtype = np.complex128 if np.iscomplexobj(arr) else np.float64
        arr = np.array(arr, dtype=dtype, order="C", copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if not self.peak > 0:
            raise GridError(f"peak must be positive, got {self.peak}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def field(self) -> str:
        return field_of(self.data)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def save(self, stem) -> tuple[Path, Path]:
        return save_grid(stem, self.data, peak=self.peak)

    @classmethod
    def load(cls, stem) -> "Grid":
        data, header = load_grid(stem, with_header=True)
        return cls(data, peak=header["peak"])


def _paths(stem) -> tuple[Path, Path]:
    stem = Path(stem)
    if stem.suffix == ".grid":
        stem = stem.with_suffix("")
    return stem.with_name(stem.name + ".grid"), stem.with_name(stem.name + ".grid.json")


def save_grid(stem, data, peak: float = 1.0) -> tuple[Path, Path]:
    """Write ``data`` as ``<stem>.grid`` plus its JSON header."""
    data = np.asarray(data)
    shape = check_shape(data.shape)
    field = field_of(data)
    raw_path, header_path = _paths(stem)
    raw_path.parent.mkdir(parents=True, exist_ok=True)
    if field == "complex":
        flat = np.ascontiguousarray(data, dtype=np.complex128).view(np.float64)
    else:
        flat = np.ascontiguousarray(data, dtype=np.float64)
    raw_path.write_bytes(flat.astype("<f8").tobytes(order="C"))
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "shape": list(shape),
        "field": field,
        "peak": float(peak),
    }
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return raw_path, header_path


def load_grid(stem, with_header: bool = False):
    raw_path, header_path = _paths(stem)
    header = json.loads(header_path.read_text())
    if header.get("format") != FORMAT_NAME:
        raise GridError(f"{header_path}: not a {FORMAT_NAME} header")
    shape = check_shape(header["shape"])
    flat = np.frombuffer(raw_path.read_bytes(), dtype="<f8").astype(np.float64)
    if header["field"] == "complex":
        if flat.size != 2 * np.prod(shape):
            raise GridError(f"{raw_path}: expected {2 * np.prod(shape)} values, got {flat.size}")
        data = flat.view(np.complex128).reshape(shape).copy()
    elif header["field"] == "real":
        if flat.size != np.prod(shape):
            raise GridError(f"{raw_path}: expected {np.prod(shape)} values, got {flat.size}")
        data = flat.reshape(shape).copy()
    else:
        raise GridError(f"{header_path}: unknown field tag {header['field']!r}")
    if with_header:
        return data, header
    return data


def write_pgm(path, image, peak: float = 1.0) -> Path:
    """Export a real 2D image as a 16-bit binary PGM, clipped to ``[0, peak]``."""
    image = np.asarray(image)
    if image.ndim != 2 or np.iscomplexobj(image):
        raise GridError("PGM export needs a real 2D image")
    scaled = np.clip(image / peak, 0.0, 1.0) * 65535.0
    pixels = np.rint(scaled).astype(">u2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = image.shape
    path.write_bytes(f"P5\n{w} {h}\n65535\n".encode("ascii") + pixels.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1
    if fields[0] != b"P5":
        raise GridError(f"{path}: not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw[pos:], dtype=dtype, count=w * h).reshape(h, w).astype(np.float64) / maxval
