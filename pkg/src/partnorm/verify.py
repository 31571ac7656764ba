"""Self-checks run by ``partnorm verify``.

Each suite returns :class:`Check` rows.  Dense references are built here
from first principles (explicit DFT matrices, circulant index arithmetic,
per-pixel chord clipping for the ray transform) and share no code with the
matrix-free operators they check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factorfit import frobenius_oracle, loss_and_grad, monte_carlo_loss
from .linop import (
    ConvOperator,
    LinearOperator,
    MaskOperator,
    MatrixOperator,
    MriOperator,
    NormalOperator,
    Radon2D,
    cartesian_mask,
    coil_maps,
    dense_matrix,
    dot_test,
    gaussian_kernel,
    uniform_angles,
    wrap_kernel,
)
from .partition import ReducedOperator, Selection
from .rng import SeededRng, gaussian_probe
from .spectral import PLAIN, SANDWICH, DiagCirculantFactor, FactorOperator, patch_normal_apply

SUITES = ("adjoint", "dense-oracle", "patch-exactness", "monte-carlo", "gradients")


@dataclass(frozen=True)
class Check:
    suite: str
    case: str
    value: float
    tol: float
    passed: bool

    def row(self):
        return (self.suite, self.case, f"{self.value:.3e}", f"{self.tol:.1e}", "pass" if self.passed else "FAIL")


def _rel(a, b) -> float:
    den = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / den) if den > 0 else float(np.linalg.norm(a))


# -- dense references -------------------------------------------------------

def dft_matrix(shape, axes=None) -> np.ndarray:
    """Unitary DFT over ``axes`` of a C-ordered grid, as a dense matrix."""
    axes = range(len(shape)) if axes is None else axes
    axes = {a % len(shape) for a in axes}
    mats = []
    for ax, n in enumerate(shape):
        if ax in axes:
            k = np.arange(n)
            mats.append(np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n))
        else:
            mats.append(np.eye(n))
    out = np.ones((1, 1))
    for M in mats:
        out = np.kron(out, M)
    return out


def circulant_matrix(taps) -> np.ndarray:
    """``C[i, j] = taps[(i - j) mod shape]`` on the raveled grid."""
    taps = np.asarray(taps)
    idx = np.indices(taps.shape).reshape(taps.ndim, -1)
    diff = (idx[:, :, None] - idx[:, None, :]) % np.array(taps.shape)[:, None, None]
    return taps[tuple(diff)]


def chord_lengths(n: int, angles, det_count: int, det_spacing: float = 1.0) -> np.ndarray:
    """Ray-transform matrix by clipping every ray against every pixel box.

    Ray ``(theta, s)`` is ``s (cos, sin) + t (-sin, cos)``; pixel ``[i, j]``
    is ``[j - n/2, j + 1 - n/2] x [i - n/2, i + 1 - n/2]``.
    """
    half = 0.5 * n
    i, j = np.divmod(np.arange(n * n), n)
    xlo, xhi = j - half, j + 1 - half
    ylo, yhi = i - half, i + 1 - half
    rows = []
    for theta in angles:
        c, sn = np.cos(theta), np.sin(theta)
        for b in range(det_count):
            s = (b - 0.5 * (det_count - 1)) * det_spacing
            x0, y0 = s * c, s * sn
            lo = np.full(n * n, -np.inf)
            hi = np.full(n * n, np.inf)
            ok = np.ones(n * n, dtype=bool)
            for p0, d, a, bb in ((x0, -sn, xlo, xhi), (y0, c, ylo, yhi)):
                if abs(d) < 1e-15:
                    ok &= (p0 > a) & (p0 < bb)
                else:
                    t1, t2 = (a - p0) / d, (bb - p0) / d
                    lo = np.maximum(lo, np.minimum(t1, t2))
                    hi = np.minimum(hi, np.maximum(t1, t2))
            rows.append(np.where(ok, np.clip(hi - lo, 0.0, None), 0.0))
    return np.array(rows)


def factor_matrix(H: DiagCirculantFactor) -> np.ndarray:
    F = dft_matrix(H.shape)
    C = F.conj().T @ np.diag(H.lam.ravel()) @ F
    m = H.m.ravel()
    if H.variant == PLAIN:
        return np.diag(m) @ C
    return np.diag(m.conj()) @ C @ np.diag(m)


def mri_matrix(op: MriOperator) -> np.ndarray:
    F = dft_matrix(op.in_shape, op.fft_axes)
    blocks = [np.diag(op.mask.ravel()) @ F @ np.diag(s.ravel()) for s in op.sensitivities]
    return np.vstack(blocks)


# -- shipped operators -------------------------------------------------------

def shipped_operators(seed: int = 0) -> dict[str, tuple[LinearOperator, np.ndarray]]:
    """Small instances of every operator family with their dense references."""
    rng = SeededRng(seed)
    r = rng.spawn(8)
    ops = {}

    mask = r[0].uniform(size=(16, 16)) < 0.6
    ops["mask-2d"] = (MaskOperator(mask), np.diag(mask.ravel().astype(float)))

    k2 = gaussian_kernel(5, 1.2, 2)
    ops["conv-2d"] = (ConvOperator(k2, (16, 16)), circulant_matrix(wrap_kernel(k2, (16, 16))))
    k3 = r[1].normal((3, 3, 3)) + 1j * r[1].normal((3, 3, 3))
    ops["conv-3d-complex"] = (ConvOperator(k3, (8, 8, 6), field="complex"),
                              circulant_matrix(wrap_kernel(k3, (8, 8, 6))))
    k1 = r[2].normal(7)
    ops["conv-1d"] = (ConvOperator(k1, (40,)), circulant_matrix(wrap_kernel(k1, (40,))))

    radon = Radon2D(16, uniform_angles(12))
    R = chord_lengths(16, radon.angles, radon.det_count, radon.det_spacing)
    ops["radon-16"] = (radon, R)
    radon_odd = Radon2D(15, uniform_angles(7, offset=0.1), det_count=23, det_spacing=0.9)
    ops["radon-15-offset"] = (radon_odd, chord_lengths(15, radon_odd.angles, 23, 0.9))
    ops["radon-normal"] = (NormalOperator(radon), R.T @ R)
    S = Selection((16, 16), (3, 5), (6, 7))
    cols = np.flatnonzero(S.embed(np.ones(S.extents)).ravel())
    ops["radon-reduced"] = (ReducedOperator(radon, S), R[:, cols])

    mri = MriOperator(coil_maps((12, 12), 4, r[3]), cartesian_mask((12, 12), 3.0, r[4]))
    ops["mri-4coil"] = (mri, mri_matrix(mri))
    mri3 = MriOperator(coil_maps((4, 6, 6), 2, r[5]), cartesian_mask((4, 6, 6), 2.0, r[6]), fft_axes=(1, 2))
    ops["mri-3d-slab-fft"] = (mri3, mri_matrix(mri3))

    for variant in (PLAIN, SANDWICH):
        shape = (10, 12)
        m = r[7].normal(shape) + 1j * r[7].normal(shape)
        lam = r[7].normal(shape) + 1j * r[7].normal(shape)
        H = DiagCirculantFactor(m, lam, variant)
        ops[f"factor-{variant}"] = (FactorOperator(H), factor_matrix(H))
    return ops


def _probe(op_shape, field, rng):
    return gaussian_probe(op_shape, rng, field == "complex")


def suite_adjoint(opts: dict, ops=None) -> list[Check]:
    ops = ops or shipped_operators(opts["seed"])
    out = []
    for name, (op, _) in ops.items():
        rng = SeededRng(opts["seed"]).spawn(1)[0]
        worst = max(dot_test(op, rng) for _ in range(opts["dot_pairs"]))
        out.append(Check("adjoint", name, worst, opts["dot_tol"], worst <= opts["dot_tol"]))
    return out


def suite_dense_oracle(opts: dict, ops=None) -> list[Check]:
    ops = ops or shipped_operators(opts["seed"])
    out = []
    rng = SeededRng(opts["seed"] + 1)
    for name, (op, D) in ops.items():
        # whole-matrix comparison plus random products for the adjoint
        worst = _rel(dense_matrix(op), D)
        for _ in range(5):
            x = _probe(op.in_shape, op.in_field, rng)
            y = _probe(op.out_shape, op.out_field, rng)
            worst = max(worst, _rel(op.apply(x).ravel(), D @ x.ravel()),
                        _rel(op.adjoint(y).ravel(), D.conj().T @ y.ravel()))
        out.append(Check("dense-oracle", name, worst, opts["oracle_tol"], worst <= opts["oracle_tol"]))
    return out


def random_triple(rng: SeededRng, d: int):
    """A seeded (volume shape, patch selection, factor) triple in ``d`` dims."""
    g = rng.generator
    shape = tuple(int(v) for v in g.integers({1: 8, 2: 6, 3: 4}[d], {1: 65, 2: 25, 3: 11}[d], size=d))
    ext = tuple(int(g.integers(1, n + 1)) for n in shape)
    origin = tuple(int(g.integers(0, n - e + 1)) for n, e in zip(shape, ext))
    variant = PLAIN if g.random() < 0.5 else SANDWICH
    m = rng.normal(shape) + 1j * rng.normal(shape)
    lam = rng.normal(shape) + 1j * rng.normal(shape)
    return DiagCirculantFactor(m, lam, variant), Selection(shape, origin, ext)


def suite_patch_exactness(opts: dict) -> list[Check]:
    out = []
    rng = SeededRng(opts["seed"] + 2)
    n = opts["exact_triples"]
    for t in range(n):
        d = 1 + t % 3
        H, S = random_triple(rng, d)
        x = rng.normal(S.extents) + 1j * rng.normal(S.extents)
        fast = patch_normal_apply(H, S, x)
        ref = S.extract(H.apply(S.embed(x)))
        err = _rel(fast, ref)
        case = f"d{d}-{H.variant}-vol{'x'.join(map(str, H.shape))}-patch{'x'.join(map(str, S.extents))}"
        out.append(Check("patch-exactness", case, err, opts["exact_tol"], err <= opts["exact_tol"]))
    return out


def mc_instance(variant: str, seed: int):
    """``(target, H)`` on a 16x16 grid for the Monte Carlo identity check."""
    rng = SeededRng(seed)
    shape = (16, 16)
    if variant == PLAIN:
        target = NormalOperator(ConvOperator(gaussian_kernel(5, 1.0, 2), shape))
        m = 1.0 + 0.2 * rng.normal(shape)
    else:
        target = NormalOperator(MriOperator(coil_maps(shape, 1, rng), cartesian_mask(shape, 2.0, rng)))
        m = np.exp(0.3j * rng.normal(shape))
    lam = np.fft.fftn(rng.normal(shape)) * 0.3 + 1.0
    return target, DiagCirculantFactor(m, lam, variant)


def suite_monte_carlo(opts: dict) -> list[Check]:
    out = []
    k = opts["mc_sigmas"]
    for variant in (PLAIN, SANDWICH):
        target, H = mc_instance(variant, opts["seed"] + 3)
        oracle = frobenius_oracle(target, H)
        for n in opts["mc_probes"]:
            mean, se = monte_carlo_loss(target, H, n, SeededRng(opts["seed"] + 4 + n))
            z = abs(mean - oracle) / se
            out.append(Check("monte-carlo", f"{variant}-N{n}", z, k, z <= k))
    return out


def grad_instance(variant: str, rng: SeededRng, shape=(4, 5)):
    cplx = variant == SANDWICH
    n = int(np.prod(shape))
    if cplx:
        B = rng.normal((n, n)) + 1j * rng.normal((n, n))
        T = B.conj().T @ B / n
        m = rng.normal(shape) + 1j * rng.normal(shape)
    else:
        B = rng.normal((n, n))
        T = B.T @ B / n
        m = rng.normal(shape)
    target = MatrixOperator(T, shape, shape)
    lam = rng.normal(shape) + 1j * rng.normal(shape)
    probes = [gaussian_probe(shape, rng, cplx) for _ in range(3)]
    return m, lam, target, probes


def finite_difference_grad(m, lam, target, probes, variant: str, h: float = 1e-6):
    """Central differences in every real coordinate of ``(m, lam)``."""
    def loss(mm, ll):
        return loss_and_grad(mm, ll, target, probes, variant)[0]

    def fd(param, other, first):
        g = np.zeros(param.shape, dtype=np.complex128 if np.iscomplexobj(param) else np.float64)
        units = (1.0, 1j) if np.iscomplexobj(param) else (1.0,)
        for idx in np.ndindex(param.shape):
            for unit in units:
                up, dn = param.copy(), param.copy()
                up[idx] += h * unit
                dn[idx] -= h * unit
                lu = loss(up, other) if first else loss(other, up)
                ld = loss(dn, other) if first else loss(other, dn)
                g[idx] += unit * (lu - ld) / (2 * h)
        return g

    return fd(m, lam, True), fd(lam, m, False)


def suite_gradients(opts: dict) -> list[Check]:
    out = []
    tol = opts["grad_tol"]
    for variant in (PLAIN, SANDWICH):
        rng = SeededRng(opts["seed"] + 5 + (variant == SANDWICH))
        for i in range(opts["grad_instances"]):
            m, lam, target, probes = grad_instance(variant, rng)
            _, gm, gl = loss_and_grad(m, lam, target, probes, variant)
            fm, fl = finite_difference_grad(m, lam, target, probes, variant)
            err = _rel(np.concatenate([gm.ravel(), gl.ravel()]), np.concatenate([fm.ravel(), fl.ravel()]))
            out.append(Check("gradients", f"{variant}-{i}", err, tol, err <= tol))
    return out


DEFAULTS = {
    "dot_pairs": 100, "dot_tol": 1e-10, "oracle_tol": 1e-10, "exact_triples": 30, "exact_tol": 1e-12,
    "mc_probes": [100, 1000, 10000], "mc_sigmas": 3.0, "grad_instances": 20, "grad_tol": 1e-5, "seed": 0,
}


def run_suites(names=None, opts: dict | None = None) -> list[Check]:
    opts = {**DEFAULTS, **(opts or {})}
    names = list(names or SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    runners = {
        "adjoint": suite_adjoint,
        "dense-oracle": suite_dense_oracle,
        "patch-exactness": suite_patch_exactness,
        "monte-carlo": suite_monte_carlo,
        "gradients": suite_gradients,
    }
    ops = shipped_operators(opts["seed"]) if {"adjoint", "dense-oracle"} & set(names) else None
    out = []
    for name in names:
        fn = runners[name]
        out.extend(fn(opts, ops) if name in ("adjoint", "dense-oracle") else fn(opts))
    return out
