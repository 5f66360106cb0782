"""Simulated iteration latency and the profiled cost lookup table.

Latency is in abstract units. One speculative iteration costs a fixed
overhead, a per-draft-step charge, a per-verified-token charge and a charge
per (layer, expert) pair loaded for the verified batch. The expert term is
what makes large trees expensive on a sparse MoE target.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .distcore import Rng, sample
from .drafter import Drafter
from .drafttree import build_tree, prefix_sequence
from .errors import ConfigError, InvalidInputError, InvariantError
from .moetarget import ExpertActivation, MoETarget


@dataclass(frozen=True)
class CostParams:
    fixed_overhead: float = 30.0
    per_token: float = 0.1
    per_expert: float = 1.0
    draft_step_cost: float = 1.0

    def __post_init__(self):
        vals = asdict(self).values()
        if any(not v >= 0 for v in vals) or not any(v > 0 for v in vals):
            raise ConfigError("cost params must be >= 0 with at least one positive")

    @classmethod
    def expert_dominated(cls) -> "CostParams":
        return cls()

    @classmethod
    def dense(cls) -> "CostParams":
        """No expert-loading term: cost grows only with verified tokens."""
        return cls(per_expert=0.0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TreeParams:
    steps: int = 4
    topk: int = 8
    draft_tokens: int = 32

    def __post_init__(self):
        if self.steps < 1 or self.topk < 1 or self.draft_tokens < 1:
            raise ConfigError("tree params must be >= 1")

    @property
    def tree_size(self) -> int:
        return 1 + self.steps * self.topk

    @property
    def max_prefix(self) -> int:
        """Largest prefix size a cost table covers."""
        return min(self.draft_tokens + 1, self.tree_size)


def simulate_verify_cost(params: CostParams, k: int, activation: ExpertActivation,
                         steps_drafted: int) -> float:
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    return (params.fixed_overhead
            + params.draft_step_cost * steps_drafted
            + params.per_token * k
            + params.per_expert * activation.union_size_total)


def autoregressive_cost(params: CostParams, model: MoETarget) -> float:
    cfg = model.config
    single = ExpertActivation(tuple(frozenset(range(cfg.active_experts))
                                    for _ in range(cfg.num_layers)))
    return simulate_verify_cost(params, 1, single, 0)


@dataclass(frozen=True)
class CostTable:
    """``per_k[k - 1]`` is the profiled latency C(k) of an iteration verifying k nodes."""

    per_k: tuple[float, ...]
    ar_cost: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.per_k:
            raise InvariantError("cost table is empty")
        arr = np.asarray(self.per_k)
        if np.any(arr <= 0):
            raise InvariantError("cost table entries must be positive")
        if np.any(np.diff(arr) < 0):
            raise InvariantError("cost table must be non-decreasing in k")

    def __len__(self) -> int:
        return len(self.per_k)

    def cost(self, k: int) -> float:
        return self.per_k[k - 1]

    def to_dict(self) -> dict:
        return {"per_k": list(self.per_k), "ar_cost": self.ar_cost, "meta": self.meta}

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "CostTable":
        unknown = set(doc) - {"per_k", "ar_cost", "meta"}
        if unknown:
            raise ConfigError(f"unknown cost-table keys: {sorted(unknown)}")
        try:
            return cls(tuple(float(x) for x in doc["per_k"]), float(doc["ar_cost"]),
                       dict(doc.get("meta", {})))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed cost table: {exc}") from exc

    @classmethod
    def load(cls, path) -> "CostTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def config_hash(*parts: dict) -> str:
    blob = json.dumps(parts, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def profile_raw(model: MoETarget, drafter: Drafter, params: CostParams, tree_params: TreeParams,
                num_iters: int, rng: Rng) -> np.ndarray:
    """Unsmoothed mean latency for k = 1..max_prefix over ``num_iters`` warmup trees.

    Each warmup tree is grown from a random context and scored for every
    prefix size, so all k share one seed stream.
    """
    if num_iters < 1:
        raise InvalidInputError("num_iters must be >= 1")
    cfg = model.config
    kmax = tree_params.max_prefix
    totals = np.zeros(kmax)
    for _ in range(num_iters):
        context = [int(t) for t in rng.integers(0, cfg.vocab_size, size=cfg.context_order)]
        root = sample(model.target_dist(context, 1.0), rng)
        tree = build_tree(drafter, root, context, tree_params.steps, tree_params.topk)
        order = prefix_sequence(tree)[:kmax]
        sets = [set() for _ in range(cfg.num_layers)]
        for k, nid in enumerate(order, start=1):
            for layer, experts in enumerate(model.routed_experts(tree.context(nid))):
                sets[layer].update(int(e) for e in experts)
            act = ExpertActivation(tuple(frozenset(s) for s in sets))
            totals[k - 1] += simulate_verify_cost(params, k, act, tree_params.steps)
    return totals / num_iters


def profile_costs(model: MoETarget, drafter: Drafter, params: CostParams, tree_params: TreeParams,
                  num_iters: int, rng: Rng) -> CostTable:
    raw = profile_raw(model, drafter, params, tree_params, num_iters, rng)
    smoothed = np.maximum.accumulate(raw)
    meta = {
        "num_profile_iters": int(num_iters),
        "seed": list(rng.seed) if isinstance(rng.seed, tuple) else rng.seed,
        "config_hash": config_hash(model.config.to_dict(), params.to_dict(),
                                   asdict(tree_params), {"alpha": drafter.alpha}),
    }
    return CostTable(tuple(float(x) for x in smoothed), autoregressive_cost(params, model), meta)
