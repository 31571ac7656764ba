"""Seeded randomness.

All random draws go through :class:`SeededRng`, a PCG64 generator
(``numpy.random.PCG64``) keyed by an unsigned 64-bit seed.  Child streams for
parallel work are derived with ``numpy.random.SeedSequence.spawn``, so the
``i``-th child of a given seed is the same regardless of how many workers
consume them.
"""
from __future__ import annotations

import numpy as np

ALGORITHM = "PCG64"


class SeededRng:
    def __init__(self, seed: int, _sequence: np.random.SeedSequence | None = None):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._sequence = _sequence if _sequence is not None else np.random.SeedSequence(seed)
        self.generator = np.random.Generator(np.random.PCG64(self._sequence))

    def spawn(self, n: int) -> list["SeededRng"]:
        """Return ``n`` independent child streams (deterministic split)."""
        return [SeededRng(self.seed, _sequence=s) for s in self._sequence.spawn(n)]

    def normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, algorithm={ALGORITHM})"


def as_rng(rng) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    return SeededRng(rng)


def gaussian_probe(shape, rng: SeededRng, complex_field: bool = False) -> np.ndarray:
    """I.i.d. standard normal probe.

    Complex probes have independent N(0, 1/2) real and imaginary parts, so
    that E|z|^2 = 1 and E[z z^H] = I.
    """
    shape = tuple(int(n) for n in shape)
    # measurement grids may carry a coil axis on top of a 3D volume
    if not shape or min(shape) < 1:
        raise ValueError(f"probe shape needs positive extents, got {shape}")
    if complex_field:
        parts = rng.normal(shape + (2,)) * np.sqrt(0.5)
        return parts[..., 0] + 1j * parts[..., 1]
    return rng.normal(shape)
