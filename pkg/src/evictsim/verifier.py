"""Target-side verification of a tree prefix.

Sampling mode walks down the prefix one layer at a time. At the current node
each kept child ``c`` is tried in order_key order and accepted with its
probability under the current residual target distribution; a rejected
child's token is zeroed and the residual is renormalised over the whole
vocabulary. When no child is accepted, or the node has no kept children, a
bonus token is drawn from the residual. Every child is thereby committed with
exactly its original target probability, so the output is lossless.

Greedy mode (temperature 0) follows the child whose token is the target
argmax, and emits the argmax at the end of the path as the bonus token.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distcore import Distribution, Rng, sample
from .drafttree import TreePrefix
from .errors import InvalidInputError
from .moetarget import ExpertActivation, MoETarget


@dataclass(frozen=True)
class VerifyResult:
    accepted_path: tuple[int, ...]
    bonus_token: int
    committed_tokens: tuple[int, ...]
    activation: ExpertActivation

    @property
    def accepted_len(self) -> int:
        return len(self.accepted_path)


def _finish(prefix: TreePrefix, model: MoETarget, path: list[int], bonus: int) -> VerifyResult:
    tree = prefix.tree
    tokens = tuple(tree.nodes[i].token for i in path) + (int(bonus),)
    # The whole prefix goes through the target in one pass.
    return VerifyResult(tuple(path), int(bonus), tokens, prefix.activation(model))


def verify_sampling(prefix: TreePrefix, model: MoETarget, temperature: float,
                    rng: Rng) -> VerifyResult:
    if not temperature > 0:
        raise InvalidInputError("verify_sampling needs temperature > 0; use verify_greedy")
    tree = prefix.tree
    node = 0
    path = [0]
    while True:
        residual = model.target_dist(tree.context(node), temperature).probs.copy()
        accepted = None
        for c in prefix.kept_children(node):
            tok = tree.nodes[c].token
            p = residual[tok]
            if rng.random() < p:
                accepted = c
                break
            residual[tok] = 0.0
            residual /= residual.sum()
        if accepted is None:
            bonus = sample(Distribution(residual), rng)
            return _finish(prefix, model, path, bonus)
        node = accepted
        path.append(node)


def verify_greedy(prefix: TreePrefix, model: MoETarget) -> VerifyResult:
    tree = prefix.tree
    node = 0
    path = [0]
    while True:
        best = model.target_dist(tree.context(node), 0.0).argmax()
        match = next((c for c in prefix.kept_children(node) if tree.nodes[c].token == best), None)
        if match is None:
            return _finish(prefix, model, path, best)
        node = match
        path.append(node)


def target_path_probs(prefix: TreePrefix, model: MoETarget, temperature: float = 1.0) -> np.ndarray:
    """Per-node target probability of each node's token given its parent's context.

    Indexed by node id over the whole tree; the root and unkept nodes are 1.0
    and NaN respectively.
    """
    tree = prefix.tree
    out = np.full(len(tree), np.nan)
    out[0] = 1.0
    for i in prefix.kept_ids:
        v = tree.nodes[i]
        if v.parent is not None:
            out[i] = model.target_dist(tree.context(v.parent), temperature)[v.token]
    return out
