"""Domain partitioning: patch selections, reduced subproblems, schedules."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .grid import check_shape
from .linop.base import LinearOperator, OperatorError
from .spectral import CroppedKernel, DiagCirculantFactor, PatchNormal


class PartitionError(ValueError):
    pass


def _per_dim(value, ndim, name):
    if np.isscalar(value):
        return (int(value),) * ndim
    value = tuple(int(v) for v in value)
    if len(value) != ndim:
        raise PartitionError(f"{name} needs {ndim} entries, got {value}")
    return value


@dataclass(frozen=True)
class Selection:
    """Cuboid patch ``[origin, origin + extents)`` of a volume.

    ``extract`` is ``S``, ``embed`` is ``S^T``; the complement operators act on
    the voxels outside the patch, flattened in row-major order.
    """

    volume_shape: tuple[int, ...]
    origin: tuple[int, ...]
    extents: tuple[int, ...]

    def __post_init__(self):
        shape = check_shape(self.volume_shape)
        origin = _per_dim(self.origin, len(shape), "origin")
        extents = _per_dim(self.extents, len(shape), "extents")
        for o, p, n in zip(origin, extents, shape):
            if o < 0 or p < 1 or o + p > n:
                raise PartitionError(
                    f"patch origin {origin} extents {extents} not inside volume {shape}"
                )
        object.__setattr__(self, "volume_shape", shape)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extents", extents)

    @classmethod
    def whole(cls, shape) -> "Selection":
        shape = check_shape(shape)
        return cls(shape, (0,) * len(shape), shape)

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(o, o + p) for o, p in zip(self.origin, self.extents))

    @property
    def size(self) -> int:
        return int(np.prod(self.extents))

    def _check_volume(self, x):
        x = np.asarray(x)
        if x.shape != self.volume_shape:
            raise PartitionError(f"expected a volume of shape {self.volume_shape}, got {x.shape}")
        return x

    def extract(self, x) -> np.ndarray:
        return self._check_volume(x)[self.slices].copy()

    def embed(self, x_patch) -> np.ndarray:
        x_patch = np.asarray(x_patch)
        if x_patch.shape != self.extents:
            raise PartitionError(f"expected a patch of shape {self.extents}, got {x_patch.shape}")
        out = np.zeros(self.volume_shape, dtype=x_patch.dtype)
        out[self.slices] = x_patch
        return out

    def complement_mask(self) -> np.ndarray:
        mask = np.ones(self.volume_shape, dtype=bool)
        mask[self.slices] = False
        return mask

    def extract_complement(self, x) -> np.ndarray:
        return self._check_volume(x)[self.complement_mask()]

    def embed_complement(self, x_context) -> np.ndarray:
        x_context = np.asarray(x_context)
        mask = self.complement_mask()
        if x_context.shape != (int(mask.sum()),):
            raise PartitionError(f"expected {int(mask.sum())} context values, got {x_context.shape}")
        out = np.zeros(self.volume_shape, dtype=x_context.dtype)
        out[mask] = x_context
        return out

    def zero_patch(self, x) -> np.ndarray:
        """``S_perp^T S_perp x``: the volume with the patch region zeroed."""
        out = np.array(self._check_volume(x), copy=True)
        out[self.slices] = 0
        return out


def extract(S: Selection, x) -> np.ndarray:
    return S.extract(x)


def embed(S: Selection, x_patch) -> np.ndarray:
    return S.embed(x_patch)


class ReducedOperator(LinearOperator):
    """``A S^T``: the forward model restricted to one patch."""

    def __init__(self, A: LinearOperator, S: Selection):
        if A.in_shape != S.volume_shape:
            raise PartitionError(f"operator domain {A.in_shape} != volume {S.volume_shape}")
        super().__init__(S.extents, A.out_shape, A.in_field, A.out_field)
        self.A, self.S = A, S

    def _apply(self, x):
        return self.A.apply(self.S.embed(x))

    def _adjoint(self, y):
        return self.S.extract(self.A.adjoint(y))

    def _normal(self, x):
        return self.S.extract(self.A.normal(self.S.embed(x)))


@dataclass
class Subproblem:
    """Reduced problem ``y_red = A_red x_patch`` for one patch.

    ``rhs`` (``A_red^H y_red``) is computed once at construction; it is the
    only global evaluation a patch solve needs when ``factor_normal`` is used.
    """

    selection: Selection
    operator: ReducedOperator
    data: np.ndarray
    rhs: np.ndarray
    factor_normal: PatchNormal | None = None

    def exact_normal(self, x_patch) -> np.ndarray:
        return self.operator.normal(x_patch)

    def normal(self, x_patch, path: str = "factor") -> np.ndarray:
        if path == "factor":
            if self.factor_normal is None:
                raise PartitionError("subproblem was built without a factor")
            return self.factor_normal(x_patch)
        return self.exact_normal(x_patch)

    def residual(self, x_patch) -> float:
        return float(np.linalg.norm(self.operator.apply(x_patch) - self.data))


def build_subproblem(
    A: LinearOperator,
    y,
    x_context_full,
    S: Selection,
    factor: DiagCirculantFactor | None = None,
    kernel: CroppedKernel | None = None,
) -> Subproblem:
    """Reduce ``y = A x`` to the patch ``S`` given a context volume.

    The patch region of ``x_context_full`` is ignored:
    ``y_red = y - A S_perp^T S_perp x_context_full``.
    """
    y = np.asarray(y)
    if y.shape != A.out_shape:
        raise PartitionError(f"data shape {y.shape} != operator range {A.out_shape}")
    context = S.zero_patch(x_context_full)
    y_red = y - A.apply(context)
    op = ReducedOperator(A, S)
    rhs = op.adjoint(y_red)
    patch_normal = PatchNormal(factor, S, kernel) if factor is not None else None
    return Subproblem(S, op, y_red, rhs, patch_normal)


@dataclass(frozen=True)
class PatchSchedule:
    volume_shape: tuple[int, ...]
    extents: tuple[int, ...]
    stride: tuple[int, ...]
    selections: tuple[Selection, ...] = field(repr=False)
    aggregation: str = "mean"

    def __len__(self):
        return len(self.selections)

    def __iter__(self):
        return iter(self.selections)

    def coverage(self) -> np.ndarray:
        count = np.zeros(self.volume_shape, dtype=np.int64)
        for S in self.selections:
            count[S.slices] += 1
        return count


def axis_origins(n: int, p: int, stride: int) -> list[int]:
    """Origins ``0, stride, ...`` with the last one clamped to ``n - p``."""
    origins = list(range(0, n - p + 1, stride))
    if origins[-1] != n - p:
        origins.append(n - p)
    return origins


def schedule_patches(volume_shape, extents, stride, aggregation: str = "mean") -> PatchSchedule:
    shape = check_shape(volume_shape)
    extents = _per_dim(extents, len(shape), "extents")
    stride = _per_dim(stride, len(shape), "stride")
    if any(p < 1 or p > n for p, n in zip(extents, shape)):
        raise PartitionError(f"patch extents {extents} exceed volume {shape}")
    if any(s < 1 for s in stride):
        raise PartitionError("stride must be >= 1")
    if aggregation != "mean":
        raise PartitionError(f"unsupported aggregation rule {aggregation!r}")
    per_axis = [axis_origins(n, p, s) for n, p, s in zip(shape, extents, stride)]
    selections = tuple(Selection(shape, origin, extents) for origin in itertools.product(*per_axis))
    return PatchSchedule(shape, extents, stride, selections, aggregation)


def aggregate(schedule: PatchSchedule, patch_results) -> np.ndarray:
    """Average overlapping patch results voxel by voxel, in schedule order."""
    results = list(patch_results)
    if len(results) != len(schedule):
        raise PartitionError(f"expected {len(schedule)} patch results, got {len(results)}")
    dtype = np.result_type(*[np.asarray(r).dtype for r in results], np.float64)
    acc = np.zeros(schedule.volume_shape, dtype=dtype)
    count = np.zeros(schedule.volume_shape, dtype=np.int64)
    for S, r in zip(schedule.selections, results):
        r = np.asarray(r)
        if r.shape != S.extents:
            raise PartitionError(f"patch result {r.shape} does not match extents {S.extents}")
        acc[S.slices] += r
        count[S.slices] += 1
    if np.any(count == 0):
        raise PartitionError("schedule does not cover the volume")
    multi = count > 1
    acc[multi] /= count[multi]
    return acc


__all__ = [
    "OperatorError", "PartitionError", "PatchSchedule", "ReducedOperator", "Selection",
    "Subproblem", "aggregate", "axis_origins", "build_subproblem", "embed", "extract",
    "schedule_patches",
]
