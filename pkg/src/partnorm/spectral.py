"""Diagonal-circulant factors and their exact patch-restricted evaluation.

Conventions
-----------
``F`` is the unitary DFT.  A circulant ``F^-1 diag(lam) F`` is therefore the
circular convolution with ``c = ifftn(lam)`` (numpy's unnormalized inverse),
whose tap at spatial offset ``o`` sits at index ``o mod n``.

``plain``     H x = m * F^-1(lam * F x)
``sandwich``  H x = conj(m) * F^-1(lam * F(m * x))
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import check_shape, load_grid, save_grid
from .linop.base import LinearOperator, OperatorError

PLAIN = "plain"
SANDWICH = "sandwich"
VARIANTS = (PLAIN, SANDWICH)


def _circ(lam, x):
    return np.fft.ifftn(lam * np.fft.fftn(x))


class DiagCirculantFactor:
    """The factor ``H(m, lam)``; immutable once built."""

    def __init__(self, m, lam, variant: str = PLAIN):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        m = np.asarray(m)
        lam = np.asarray(lam, dtype=np.complex128)
        check_shape(lam.shape)
        if m.shape != lam.shape:
            raise OperatorError(f"m {m.shape} and lam {lam.shape} must share a shape")
        m = m.astype(np.complex128 if np.iscomplexobj(m) else np.float64)
        m.setflags(write=False)
        lam.setflags(write=False)
        self.m, self.lam, self.variant = m, lam, variant

    @classmethod
    def identity(cls, shape, variant: str = PLAIN) -> "DiagCirculantFactor":
        shape = check_shape(shape)
        return cls(np.ones(shape), np.ones(shape, dtype=np.complex128), variant)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.lam.shape

    def _check(self, x):
        x = np.asarray(x)
        if x.shape != self.shape:
            raise OperatorError(f"factor expects shape {self.shape}, got {x.shape}")
        return x

    def apply(self, x) -> np.ndarray:
        x = self._check(x)
        if self.variant == PLAIN:
            return self.m * _circ(self.lam, x)
        return self.m.conj() * _circ(self.lam, self.m * x)

    def adjoint(self, y) -> np.ndarray:
        y = self._check(y)
        if self.variant == PLAIN:
            return _circ(self.lam.conj(), self.m.conj() * y)
        return self.m.conj() * _circ(self.lam.conj(), self.m * y)

    __call__ = apply

    def as_operator(self, real: bool = False) -> "FactorOperator":
        return FactorOperator(self, real=real)

    def save(self, directory, metadata: dict | None = None) -> Path:
        return save_factor(self, directory, metadata)

    def __repr__(self):
        return f"DiagCirculantFactor(shape={self.shape}, variant={self.variant!r})"


def factor_apply(H: DiagCirculantFactor, x) -> np.ndarray:
    return H.apply(x)


class FactorOperator(LinearOperator):
    """A factor seen as a square :class:`LinearOperator`.

    With ``real=True`` the operator acts on real grids and returns the real
    part, which is the natural surrogate for the normal operator of a real
    forward model.
    """

    def __init__(self, H: DiagCirculantFactor, real: bool = False):
        super().__init__(H.shape, H.shape, "real" if real else "complex")
        self.factor, self.real = H, real

    def _apply(self, x):
        out = self.factor.apply(x)
        return out.real if self.real else out

    def _adjoint(self, y):
        out = self.factor.adjoint(y)
        return out.real if self.real else out


class SymmetrizedFactor(FactorOperator):
    """``(H + H^H) / 2``; self-adjoint by construction."""

    def _apply(self, x):
        out = 0.5 * (self.factor.apply(x) + self.factor.adjoint(x))
        return out.real if self.real else out

    _adjoint = _apply


def symmetrize(H: DiagCirculantFactor, real: bool = False) -> SymmetrizedFactor:
    return SymmetrizedFactor(H, real=real)


@dataclass(frozen=True)
class CroppedKernel:
    """Circulant taps restricted to offsets ``[-(p-1), p-1]`` per dimension.

    ``taps`` is a circular buffer of extent ``k = 2p`` (offset ``o`` at index
    ``o mod k``) and ``lam_k = fftn(taps)``.
    """

    patch: tuple[int, ...]
    taps: np.ndarray
    lam_k: np.ndarray

    @property
    def k(self) -> tuple[int, ...]:
        return tuple(2 * p for p in self.patch)


def crop_offsets(p: int, n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Index map of the crop: (indices into the length-``n`` kernel,
    indices into the length-``k`` buffer) for offsets ``-(p-1) .. p-1``."""
    off = np.arange(-(p - 1), p)
    return off % n, off % k


def crop_kernel(H: DiagCirculantFactor, patch) -> CroppedKernel:
    """Crop the circulant part of ``H`` for patches of extent ``patch``.

    ``patch`` is a tuple of extents or any object with an ``extents`` field.
    """
    extents = tuple(int(p) for p in getattr(patch, "extents", patch))
    if len(extents) != len(H.shape):
        raise OperatorError(f"patch {extents} and volume {H.shape} differ in dimension")
    if any(p < 1 or p > n for p, n in zip(extents, H.shape)):
        raise OperatorError(f"patch {extents} larger than volume {H.shape}")
    full = np.fft.ifftn(H.lam)
    k = tuple(2 * p for p in extents)
    maps = [crop_offsets(p, n, kk) for p, n, kk in zip(extents, H.shape, k)]
    taps = np.zeros(k, dtype=np.complex128)
    taps[np.ix_(*[dst for _, dst in maps])] = full[np.ix_(*[src for src, _ in maps])]
    lam_k = np.fft.fftn(taps)
    taps.setflags(write=False)
    lam_k.setflags(write=False)
    return CroppedKernel(extents, taps, lam_k)


class PatchNormal:
    """Patch-restricted evaluation of ``S H S^T`` for one selection.

    Only patch-sized (``p``) and crop-sized (``k = 2p``) arrays are touched
    per call; ``S m`` is kept as a view into ``m``.
    """

    def __init__(self, H: DiagCirculantFactor, selection, kernel: CroppedKernel | None = None):
        self.extents = tuple(selection.extents)
        self.kernel = kernel if kernel is not None else crop_kernel(H, self.extents)
        if self.kernel.patch != self.extents:
            raise OperatorError("cropped kernel was built for another patch extent")
        self.variant = H.variant
        self.m_patch = H.m[selection.slices]

    def __call__(self, x_patch) -> np.ndarray:
        x_patch = np.asarray(x_patch)
        if x_patch.shape != self.extents:
            raise OperatorError(f"patch evaluation expects {self.extents}, got {x_patch.shape}")
        if self.variant == SANDWICH:
            x_patch = self.m_patch * x_patch
        z = np.fft.ifftn(self.kernel.lam_k * np.fft.fftn(x_patch, s=self.kernel.k, axes=range(x_patch.ndim)))
        z = z[tuple(slice(0, p) for p in self.extents)]
        if self.variant == SANDWICH:
            return self.m_patch.conj() * z
        return self.m_patch * z


def patch_normal_apply(H: DiagCirculantFactor, selection, x_patch, kernel: CroppedKernel | None = None) -> np.ndarray:
    return PatchNormal(H, selection, kernel)(x_patch)


def save_factor(H: DiagCirculantFactor, directory, metadata: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_grid(directory / "m", H.m)
    save_grid(directory / "lambda", H.lam)
    manifest = {
        "variant": H.variant,
        "shape": list(H.shape),
        "m_field": "complex" if np.iscomplexobj(H.m) else "real",
        "fit": metadata or {},
    }
    path = directory / "factor.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_factor(directory) -> tuple[DiagCirculantFactor, dict]:
    directory = Path(directory)
    manifest = json.loads((directory / "factor.json").read_text())
    H = DiagCirculantFactor(load_grid(directory / "m"), load_grid(directory / "lambda"), manifest["variant"])
    if list(H.shape) != manifest["shape"]:
        raise OperatorError("factor manifest shape does not match its grids")
    return H, manifest
