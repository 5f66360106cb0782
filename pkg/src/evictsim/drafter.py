"""Draft model with a calibration knob.

``alpha`` mixes the target's own distribution with a context-keyed
pseudo-random perturbation, so a single drafter can be made well or poorly
calibrated, and its miscalibration varies from context to context.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .distcore import Distribution, softmax_temp
from .errors import ConfigError
from .moetarget import MoETarget


class Drafter:
    def __init__(self, target: MoETarget, alpha: float = 0.8, noise_seed: int = 1,
                 noise_scale: float = 2.0):
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {alpha!r}")
        if not noise_scale >= 0.0:
            raise ConfigError("noise_scale must be >= 0")
        self.target = target
        self.alpha = float(alpha)
        self.noise_seed = int(noise_seed)
        self.noise_scale = float(noise_scale)
        self._cache: dict[tuple[int, ...], Distribution] = {}

    def perturbation(self, context: Sequence[int]) -> Distribution:
        key = self.target.context_key(context)
        gen = np.random.default_rng([self.noise_seed, len(key), *key])
        z = gen.standard_normal(self.target.vocab_size)
        return softmax_temp(self.noise_scale * z, 1.0)

    def draft_dist(self, context: Sequence[int]) -> Distribution:
        key = self.target.context_key(context)
        dist = self._cache.get(key)
        if dist is None:
            p = self.target.target_dist(context, 1.0)
            if self.alpha == 1.0:
                dist = p
            else:
                mix = self.alpha * p.probs + (1.0 - self.alpha) * self.perturbation(context).probs
                dist = Distribution.normalized(mix)
            self._cache[key] = dist
        return dist

    def __repr__(self) -> str:
        return (f"Drafter(alpha={self.alpha}, noise_seed={self.noise_seed}, "
                f"noise_scale={self.noise_scale})")
