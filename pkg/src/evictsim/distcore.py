"""Finite distributions, temperature shaping, seeded sampling and distances.

Randomness comes from numpy's PCG64 bit generator. Its output stream is
specified exactly and is identical on every platform for a given seed, which
is the property the rest of the simulator relies on for bit-exact replay.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InvalidInputError

PROB_ATOL = 1e-9


class Distribution:
    """Immutable probability vector over ``range(len(probs))``."""

    __slots__ = ("_probs",)

    def __init__(self, probs, *, atol: float = PROB_ATOL):
        p = np.array(probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise InvalidInputError("distribution must be a non-empty vector")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("distribution has non-finite entries")
        if p.min() < 0.0:
            raise InvalidInputError(f"negative probability {p.min()!r}")
        total = p.sum()
        if abs(total - 1.0) > atol:
            raise InvalidInputError(f"probabilities sum to {total!r}, not 1")
        p.setflags(write=False)
        self._probs = p

    @classmethod
    def normalized(cls, weights) -> "Distribution":
        """Build a distribution by rescaling non-negative ``weights``."""
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if not np.isfinite(total) or total <= 0.0:
            raise InvalidInputError("weights must have a positive finite sum")
        return cls(w / total)

    @classmethod
    def point_mass(cls, index: int, size: int) -> "Distribution":
        p = np.zeros(size)
        p[index] = 1.0
        return cls(p)

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    def __len__(self) -> int:
        return self._probs.size

    def __getitem__(self, i):
        return self._probs[i]

    def argmax(self) -> int:
        # np.argmax returns the first maximal index, i.e. lowest-index ties.
        return int(np.argmax(self._probs))

    def __repr__(self) -> str:
        return f"Distribution({np.array2string(self._probs, precision=4)})"


class Rng:
    """Single-owner seeded generator (PCG64).

    ``Rng(seed)`` and ``Rng.derive(seed, *keys)`` give reproducible streams;
    derived streams are independent of each other and of the parent.
    """

    def __init__(self, seed: int | Sequence[int] = 0):
        self.seed = seed
        entropy = list(seed) if isinstance(seed, (tuple, list)) else int(seed)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    @classmethod
    def derive(cls, seed: int, *keys: int) -> "Rng":
        return cls((int(seed),) + tuple(int(k) for k in keys))

    def random(self) -> float:
        """Uniform draw on [0, 1)."""
        return float(self._gen.random())

    def integers(self, low: int, high: int | None = None, size=None):
        return self._gen.integers(low, high, size=size)

    @property
    def generator(self) -> np.random.Generator:
        """Underlying numpy generator, for bulk draws in tests and tools."""
        return self._gen

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed!r})"


def softmax_temp(logits, temperature: float) -> Distribution:
    """Softmax of ``logits / temperature``; temperature 0 gives the argmax point mass."""
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError("logits must be a non-empty vector")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("logits must be finite")
    if not temperature >= 0.0:
        raise InvalidInputError(f"temperature must be >= 0, got {temperature!r}")
    if temperature == 0.0:
        return Distribution.point_mass(int(np.argmax(x)), x.size)
    z = (x - x.max()) / temperature
    e = np.exp(z)
    return Distribution(e / e.sum())


def sample(dist: Distribution, rng: Rng) -> int:
    """Inverse-CDF draw of one index from ``dist``."""
    p = dist.probs
    cdf = np.cumsum(p)
    u = rng.random()
    # side="right": an index i with p[i] == 0 has cdf[i] == cdf[i-1] and
    # can never satisfy cdf[i-1] <= u < cdf[i].
    i = int(np.searchsorted(cdf, u, side="right"))
    if i >= p.size or p[i] == 0.0:
        # u landed beyond a cdf that sums to slightly under 1.
        i = int(np.flatnonzero(p)[-1])
    return i


def tv_distance(a: Distribution, b: Distribution) -> float:
    pa = a.probs if isinstance(a, Distribution) else np.asarray(a, dtype=np.float64)
    pb = b.probs if isinstance(b, Distribution) else np.asarray(b, dtype=np.float64)
    if pa.shape != pb.shape:
        raise InvalidInputError(f"length mismatch: {pa.size} vs {pb.size}")
    return float(0.5 * np.abs(pa - pb).sum())
