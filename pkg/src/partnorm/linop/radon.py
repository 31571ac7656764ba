"""2D parallel-beam tomography with exact line-length weights."""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from .base import LinearOperator, OperatorError


def default_det_count(n: int) -> int:
    # covers the image diagonal; same parity as n so that bins sit on pixel
    # centres (never on pixel edges) at 0 and 90 degrees
    count = math.ceil(math.sqrt(2.0) * n)
    return count + ((count - n) % 2)


def uniform_angles(n_angles: int, arc: float = math.pi, offset: float = 0.0) -> np.ndarray:
    return offset + arc * np.arange(n_angles) / n_angles


class Radon2D(LinearOperator):
    """Parallel-beam projector ``(n, n) -> (n_angles, det_count)``.

    Pixel ``[i, j]`` covers ``x in [j - n/2, j + 1 - n/2]``,
    ``y in [i - n/2, i + 1 - n/2]``; the ray at angle ``theta`` and detector
    offset ``s`` is ``s (cos, sin) + t (-sin, cos)``.  Each matrix entry is the
    length of the ray inside the pixel.  The adjoint is the transpose of the
    same sparse matrix.
    """

    def __init__(self, n: int, angles, det_count: int | None = None, det_spacing: float = 1.0):
        n = int(n)
        if n < 1:
            raise OperatorError("image extent must be >= 1")
        self.angles = np.asarray(angles, dtype=np.float64).ravel()
        if self.angles.size == 0:
            raise OperatorError("need at least one angle")
        self.det_count = int(det_count or default_det_count(n))
        self.det_spacing = float(det_spacing)
        self.n = n
        super().__init__((n, n), (self.angles.size, self.det_count), "real")
        rows, cols, vals = _kernels.siddon_system(n, n, self.angles, self.det_count, self.det_spacing)
        self.matrix = sp.csr_matrix(
            (vals, (rows, cols)), shape=(self.angles.size * self.det_count, n * n)
        )
        self.matrix.sum_duplicates()
        self._matrix_t = self.matrix.T.tocsr()

    def _apply(self, x):
        return (self.matrix @ x.ravel()).reshape(self.out_shape)

    def _adjoint(self, y):
        return (self._matrix_t @ y.ravel()).reshape(self.in_shape)
