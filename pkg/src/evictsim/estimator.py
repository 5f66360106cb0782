"""Accepted-length mathematics.

Accepted length counts committed tree nodes, root included. Its expectation
is the sum over nodes of the product of target probabilities along the root
path (the root contributing 1). Substituting draft probabilities gives the
pre-verification estimate, i.e. the sum of node scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distcore import Rng
from .drafttree import DraftTree, TreePrefix, prefix_sequence
from .errors import ConfigError, InvalidInputError
from .moetarget import MoETarget
from .verifier import verify_greedy, verify_sampling

ENUMERATION_LIMIT = 16


@dataclass(frozen=True)
class AcceptEstimate:
    """``prefix_sums[k - 1]`` is the estimated accepted length of the top-k prefix."""

    prefix_sums: np.ndarray
    exact_value: float | None = None

    def __len__(self) -> int:
        return len(self.prefix_sums)

    def truncated(self, k_max: int) -> "AcceptEstimate":
        return AcceptEstimate(self.prefix_sums[:k_max], self.exact_value)


def estimated_accept_prefix_sums(tree: DraftTree) -> AcceptEstimate:
    order = prefix_sequence(tree)
    sums = np.cumsum(tree.scores[order])
    sums.setflags(write=False)
    return AcceptEstimate(sums)


def _check_probs(prefix: TreePrefix, target_probs) -> np.ndarray:
    p = np.asarray(target_probs, dtype=np.float64)
    if p.shape[0] < len(prefix.tree):
        raise InvalidInputError("target_probs must cover every tree node id")
    kept = np.array([i for i in prefix.kept_ids if i != 0], dtype=int)
    vals = p[kept]
    if np.any(~np.isfinite(vals)) or np.any(vals < 0.0) or np.any(vals > 1.0):
        raise InvalidInputError("target probabilities must lie in [0, 1]")
    return p


def exact_expected_accept_len(prefix: TreePrefix, target_probs) -> float:
    """Sum over kept nodes of the path product of target probabilities."""
    p = _check_probs(prefix, target_probs)
    tree = prefix.tree
    reach = {0: 1.0}
    # Kept ids in increasing id order visit parents before children.
    for i in sorted(prefix.kept_ids):
        if i != 0:
            reach[i] = reach[tree.nodes[i].parent] * p[i]
    return float(sum(reach.values()))


def enumerate_accept_oracle(prefix: TreePrefix, target_probs,
                            sibling_order: dict[int, Sequence[int]] | None = None) -> float:
    """Expected accepted length by exhaustive recursion over the verification process.

    At each node the kept children are tried one at a time: accept with the
    current probability, otherwise drop that child's mass and renormalise the
    remaining siblings. ``sibling_order`` overrides the visiting order per node.
    """
    if prefix.k > ENUMERATION_LIMIT:
        raise ConfigError(f"enumeration limited to {ENUMERATION_LIMIT} nodes")
    p = _check_probs(prefix, target_probs)
    order = sibling_order or {}

    def tries(children: list[int], residual: dict[int, float]) -> float:
        # Expected committed nodes contributed below a node whose remaining
        # candidate children are ``children`` with residual masses ``residual``.
        if not children:
            return 0.0
        c, rest = children[0], children[1:]
        pc = residual[c]
        total = pc * subtree(c)
        if pc < 1.0:
            renorm = {w: residual[w] / (1.0 - pc) for w in rest}
            total += (1.0 - pc) * tries(rest, renorm)
        return total

    def subtree(v: int) -> float:
        kids = list(order.get(v, prefix.kept_children(v)))
        return 1.0 + tries(kids, {c: float(p[c]) for c in kids})

    return subtree(0)


def mc_accept_oracle(prefix: TreePrefix, model: MoETarget, rng: Rng, trials: int,
                     temperature: float = 1.0) -> tuple[float, float]:
    """Mean and standard error of accepted length over repeated verifier runs."""
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    lengths = np.empty(trials)
    for t in range(trials):
        if temperature == 0:
            res = verify_greedy(prefix, model)
        else:
            res = verify_sampling(prefix, model, temperature, rng)
        lengths[t] = res.accepted_len
    stderr = float(lengths.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(lengths.mean()), stderr
