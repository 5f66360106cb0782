"""Verification-budget policies.

``select_prefix_evict`` is the cost-aware rule: the prefix size maximising
estimated accepted length per unit of profiled iteration cost. The others are
cost-agnostic baselines: a fixed budget, score coverage, and a
confidence-depth rule in the spirit of dynamic-depth drafting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costmodel import CostTable
from .drafttree import DraftTree
from .errors import ConfigError, InvalidInputError
from .estimator import AcceptEstimate


@dataclass(frozen=True)
class PolicyDecision:
    k_star: int
    utility: float = float("nan")
    scanned: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


def utility(estimate: AcceptEstimate, table: CostTable, k: int) -> float:
    return table.ar_cost * float(estimate.prefix_sums[k - 1]) / table.cost(k)


def select_prefix_evict(estimate: AcceptEstimate, table: CostTable) -> PolicyDecision:
    s = np.asarray(estimate.prefix_sums, dtype=np.float64)
    if s.size == 0:
        raise InvalidInputError("empty estimate")
    if s.size > len(table):
        raise InvalidInputError(f"estimate covers {s.size} prefixes, cost table only {len(table)}")
    ratios = s / np.asarray(table.per_k[: s.size])
    k = int(np.argmax(ratios)) + 1  # first maximum: ties go to the smaller prefix
    return PolicyDecision(k, utility(estimate, table, k), ratios)


def select_prefix_fixed(k_fixed: int, tree_size: int) -> PolicyDecision:
    if k_fixed < 1:
        raise InvalidInputError("k_fixed must be >= 1")
    return PolicyDecision(min(int(k_fixed), int(tree_size)))


def select_prefix_coverage(estimate: AcceptEstimate, rho: float) -> PolicyDecision:
    """Smallest k whose score mass reaches fraction ``rho`` of the full tree's."""
    if not 0.0 < rho <= 1.0:
        raise InvalidInputError(f"rho must lie in (0, 1], got {rho!r}")
    s = np.asarray(estimate.prefix_sums, dtype=np.float64)
    if s.size == 0:
        raise InvalidInputError("empty estimate")
    coverage = s / s[-1]
    # The last entry is exactly 1, so a qualifying k always exists.
    k = int(np.flatnonzero(coverage >= rho)[0]) + 1
    return PolicyDecision(k, scanned=coverage)


def select_depth_confidence(tree: DraftTree, threshold: float) -> PolicyDecision:
    """Keep every layer up to the deepest one whose best node scores at least ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInputError(f"threshold must lie in [0, 1], got {threshold!r}")
    best = np.array([max(tree.nodes[i].cum_score for i in layer) for layer in tree.layer_index])
    depth = int(np.flatnonzero(best >= threshold)[-1])
    k = sum(len(layer) for layer in tree.layer_index[: depth + 1])
    return PolicyDecision(k, scanned=best)


@dataclass(frozen=True)
class PolicySpec:
    """Parsed policy string: ``evict``, ``fixed:K``, ``coverage:RHO``, ``depthconf:T`` or ``autoregressive``."""

    kind: str
    value: float | None = None

    KINDS = ("evict", "fixed", "coverage", "depthconf", "autoregressive")

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        name, _, arg = text.strip().partition(":")
        if name not in cls.KINDS:
            raise ConfigError(f"unknown policy {text!r}")
        if name in ("evict", "autoregressive"):
            if arg:
                raise ConfigError(f"policy {name!r} takes no argument")
            return cls(name)
        if not arg:
            raise ConfigError(f"policy {name!r} needs an argument, e.g. {name}:0.5")
        try:
            value = float(arg)
        except ValueError:
            raise ConfigError(f"bad policy argument in {text!r}") from None
        if name == "fixed":
            if value != int(value) or value < 1:
                raise ConfigError("fixed:K needs a positive integer K")
            value = int(value)
        elif name == "coverage" and not 0.0 < value <= 1.0:
            raise ConfigError("coverage:RHO needs RHO in (0, 1]")
        elif name == "depthconf" and not 0.0 <= value <= 1.0:
            raise ConfigError("depthconf:T needs T in [0, 1]")
        return cls(name, value)

    def __str__(self) -> str:
        if self.value is None:
            return self.kind
        if self.kind == "fixed":
            return f"fixed:{int(self.value)}"
        return f"{self.kind}:{self.value:g}"

    def decide(self, tree: DraftTree, estimate: AcceptEstimate, table: CostTable) -> PolicyDecision:
        """Pick a prefix size for one tree; utility is always reported against ``table``."""
        if self.kind == "evict":
            return select_prefix_evict(estimate, table)
        if self.kind == "fixed":
            d = select_prefix_fixed(int(self.value), len(estimate))
        elif self.kind == "coverage":
            d = select_prefix_coverage(estimate, self.value)
        elif self.kind == "depthconf":
            d = select_depth_confidence(tree, self.value)
            d = PolicyDecision(min(d.k_star, len(estimate)), scanned=d.scanned)
        else:
            raise ConfigError("autoregressive policy has no tree decision")
        return PolicyDecision(d.k_star, utility(estimate, table, d.k_star), d.scanned)
