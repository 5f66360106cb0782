"""Synthetic sparse MoE target model.

The model is a stand-in for a real MoE transformer that keeps the two things
speculative verification cares about: per-layer top-k expert routing of each
token's hidden state, and an exact next-token distribution at any context.

Hidden states come from a seeded embedding of the last ``context_order``
tokens (one pseudo-random unit vector per layer, position and token, summed
and renormalised). Next-token logits are the router-weighted sum of
per-expert logit tables over all layers; this accumulation is a modelling
choice of the simulator, not a description of a real network.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .distcore import Distribution, softmax_temp
from .errors import ConfigError, InvalidInputError


@dataclass(frozen=True)
class MoEConfig:
    vocab_size: int = 64
    num_layers: int = 4
    num_experts: int = 32
    active_experts: int = 4
    hidden_dim: int = 32
    context_order: int = 4
    seed: int = 0
    logit_scale: float = 3.0

    def __post_init__(self):
        for name in ("vocab_size", "num_layers", "num_experts", "active_experts",
                     "hidden_dim", "context_order"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.active_experts > self.num_experts:
            raise ConfigError("active_experts cannot exceed num_experts")
        if not self.logit_scale > 0:
            raise ConfigError("logit_scale must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ExpertActivation:
    """Per-layer union of routed experts over a batch of verified tokens."""

    per_layer_sets: tuple[frozenset[int], ...]

    @property
    def union_size_total(self) -> int:
        return sum(len(s) for s in self.per_layer_sets)

    @property
    def per_layer_sizes(self) -> list[int]:
        return [len(s) for s in self.per_layer_sets]


def _unit_rows(a: np.ndarray) -> np.ndarray:
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


class MoETarget:
    """Deterministic MoE target; every parameter is a function of ``config.seed``.

    Queries depend on a context only through its last ``context_order``
    tokens, so results are memoised on that key.
    """

    def __init__(self, config: MoEConfig | None = None):
        self.config = config = config or MoEConfig()
        rng = np.random.default_rng(config.seed)
        L, N, V, d, n = (config.num_layers, config.num_experts, config.vocab_size,
                         config.hidden_dim, config.context_order)
        # Draw order is part of the model definition: changing it changes every model.
        self.embedding = _unit_rows(rng.standard_normal((L, n, V, d)))
        self.router_weights = rng.standard_normal((L, N, d))
        self.expert_tables = rng.standard_normal((L, N, V)) * config.logit_scale
        for arr in (self.embedding, self.router_weights, self.expert_tables):
            arr.setflags(write=False)
        self._route_cache: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}
        self._logit_cache: dict[tuple[int, ...], np.ndarray] = {}
        self._dist_cache: dict[tuple[tuple[int, ...], float], Distribution] = {}

    @property
    def vocab_size(self) -> int:
        return self.config.vocab_size

    def context_key(self, context: Sequence[int]) -> tuple[int, ...]:
        if len(context) == 0:
            raise InvalidInputError("context must be non-empty")
        key = tuple(int(t) for t in context[-self.config.context_order:])
        V = self.config.vocab_size
        if any(t < 0 or t >= V for t in key):
            raise InvalidInputError(f"token outside vocabulary [0, {V})")
        return key

    def _hidden(self, key: tuple[int, ...]) -> np.ndarray:
        # Position 0 is the most recent token.
        L = self.config.num_layers
        h = np.zeros((L, self.config.hidden_dim))
        for pos, tok in enumerate(reversed(key)):
            h += self.embedding[:, pos, tok, :]
        return _unit_rows(h)

    def hidden_state(self, layer: int, context: Sequence[int]) -> np.ndarray:
        if not 0 <= layer < self.config.num_layers:
            raise InvalidInputError(f"layer {layer} out of range")
        return self._hidden(self.context_key(context))[layer]

    def router_scores(self, layer: int, h: np.ndarray) -> np.ndarray:
        h = np.asarray(h, dtype=np.float64)
        if h.shape != (self.config.hidden_dim,):
            raise InvalidInputError(
                f"hidden state must have shape ({self.config.hidden_dim},), got {h.shape}")
        return self.router_weights[layer] @ h

    def route(self, layer: int, h: np.ndarray) -> np.ndarray:
        """Indices of the ``active_experts`` largest router scores, lowest index first on ties."""
        scores = self.router_scores(layer, h)
        order = np.argsort(-scores, kind="stable")
        return np.sort(order[: self.config.active_experts])

    def _routing(self, key: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        cached = self._route_cache.get(key)
        if cached is not None:
            return cached
        k = self.config.active_experts
        h = self._hidden(key)
        scores = np.einsum("lnd,ld->ln", self.router_weights, h)
        selected = np.sort(np.argsort(-scores, axis=1, kind="stable")[:, :k], axis=1)
        picked = np.take_along_axis(scores, selected, axis=1)
        w = np.exp(picked - picked.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        self._route_cache[key] = (selected, w)
        return selected, w

    def routed_experts(self, context: Sequence[int]) -> np.ndarray:
        """(num_layers, active_experts) array of routed expert ids for one token."""
        return self._routing(self.context_key(context))[0]

    def logits(self, context: Sequence[int]) -> np.ndarray:
        key = self.context_key(context)
        out = self._logit_cache.get(key)
        if out is None:
            selected, w = self._routing(key)
            out = np.zeros(self.config.vocab_size)
            for layer in range(self.config.num_layers):
                out += w[layer] @ self.expert_tables[layer, selected[layer]]
            out.setflags(write=False)
            self._logit_cache[key] = out
        return out

    def target_dist(self, context: Sequence[int], temperature: float = 1.0) -> Distribution:
        key = (self.context_key(context), float(temperature))
        dist = self._dist_cache.get(key)
        if dist is None:
            dist = softmax_temp(self.logits(context), temperature)
            self._dist_cache[key] = dist
        return dist

    def expert_union(self, contexts: Iterable[Sequence[int]]) -> ExpertActivation:
        contexts = list(contexts)
        if not contexts:
            raise InvalidInputError("expert_union needs at least one context")
        routed = np.concatenate([self.routed_experts(ctx) for ctx in contexts], axis=1)
        return ExpertActivation(tuple(frozenset(np.unique(row).tolist()) for row in routed))
