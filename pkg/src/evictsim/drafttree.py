"""Draft token trees, cumulative node scores and budgeted pruning.

A node's score is the product of draft probabilities along its path from the
root, excluding the root itself: the root token is already committed when
drafting starts, so ``Score(root) == 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .drafter import Drafter
from .errors import ConfigError, InvalidInputError, InvariantError
from .moetarget import ExpertActivation, MoETarget

MAX_DEPTH = 16


@dataclass(frozen=True)
class TreeNode:
    id: int
    parent: int | None
    token: int
    q_prob: float
    cum_score: float
    depth: int
    order_key: int


class DraftTree:
    """Rooted token tree stored in topological order (``parent < id``)."""

    def __init__(self, nodes: Sequence[TreeNode], root_context: Sequence[int] = (),
                 params: dict | None = None):
        self.nodes: tuple[TreeNode, ...] = tuple(nodes)
        self.root_context: tuple[int, ...] = tuple(int(t) for t in root_context)
        self.params = dict(params or {})
        self._validate()

    @classmethod
    def from_parents(cls, parents: Sequence[int | None], tokens: Sequence[int],
                     q_probs: Sequence[float], root_context: Sequence[int] = (),
                     params: dict | None = None) -> "DraftTree":
        """Build a tree from parallel arrays; entry 0 is the root (its q_prob is ignored)."""
        if not (len(parents) == len(tokens) == len(q_probs)) or not parents:
            raise InvalidInputError("parents, tokens and q_probs must be equal, non-empty")
        nodes = [TreeNode(0, None, int(tokens[0]), 1.0, 1.0, 0, 0)]
        for i in range(1, len(parents)):
            par = parents[i]
            if par is None or not 0 <= par < i:
                raise InvalidInputError(f"node {i} needs a parent id in [0, {i})")
            q = float(q_probs[i])
            if not 0.0 < q <= 1.0:
                raise InvalidInputError(f"q_prob of node {i} must lie in (0, 1]")
            p = nodes[par]
            nodes.append(TreeNode(i, par, int(tokens[i]), q, p.cum_score * q, p.depth + 1, i))
        return cls(nodes, root_context, params)

    def _validate(self) -> None:
        if not self.nodes:
            raise InvariantError("tree has no nodes")
        root = self.nodes[0]
        if root.parent is not None or root.depth != 0 or root.q_prob != 1.0 or root.cum_score != 1.0:
            raise InvariantError("malformed root")
        for i, v in enumerate(self.nodes[1:], start=1):
            if v.id != i or v.parent is None or not 0 <= v.parent < i:
                raise InvariantError(f"node {i} breaks topological order")
            p = self.nodes[v.parent]
            if v.depth != p.depth + 1:
                raise InvariantError(f"node {i} has inconsistent depth")
            if abs(v.cum_score - p.cum_score * v.q_prob) > 1e-12 or v.cum_score > p.cum_score:
                raise InvariantError(f"node {i} has inconsistent cumulative score")
        if max(v.depth for v in self.nodes) > MAX_DEPTH:
            raise ConfigError(f"tree deeper than {MAX_DEPTH}")

    def __len__(self) -> int:
        return len(self.nodes)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        """Child ids of each node, in ``order_key`` order."""
        kids: list[list[int]] = [[] for _ in self.nodes]
        for v in self.nodes[1:]:
            kids[v.parent].append(v.id)
        return tuple(tuple(sorted(k, key=lambda c: self.nodes[c].order_key)) for k in kids)

    @cached_property
    def layer_index(self) -> tuple[tuple[int, ...], ...]:
        depth = max(v.depth for v in self.nodes)
        layers: list[list[int]] = [[] for _ in range(depth + 1)]
        for v in self.nodes:
            layers[v.depth].append(v.id)
        return tuple(tuple(layer) for layer in layers)

    @cached_property
    def scores(self) -> np.ndarray:
        s = np.array([v.cum_score for v in self.nodes])
        s.setflags(write=False)
        return s

    def path(self, node_id: int) -> list[int]:
        """Node ids from the root down to ``node_id``."""
        out = []
        v: int | None = node_id
        while v is not None:
            out.append(v)
            v = self.nodes[v].parent
        return out[::-1]

    def path_tokens(self, node_id: int) -> list[int]:
        return [self.nodes[i].token for i in self.path(node_id)]

    @cached_property
    def _contexts(self) -> tuple[tuple[int, ...], ...]:
        out: list[tuple[int, ...]] = []
        for v in self.nodes:
            base = self.root_context if v.parent is None else out[v.parent]
            out.append(base + (v.token,))
        return tuple(out)

    def context(self, node_id: int) -> tuple[int, ...]:
        """Tokens seen by the model at this node: root context, then the path including the node."""
        return self._contexts[node_id]

    def to_dict(self) -> dict:
        return {
            "root_context": list(self.root_context),
            "params": self.params,
            "nodes": [
                {"id": v.id, "parent": v.parent, "token": v.token,
                 "q_prob": v.q_prob, "cum_score": v.cum_score}
                for v in self.nodes
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_text(self) -> str:
        lines = []

        def walk(i: int) -> None:
            v = self.nodes[i]
            lines.append(f"{'  ' * v.depth}[{v.id}] tok={v.token} q={v.q_prob:.4f} "
                         f"score={v.cum_score:.4g}")
            for c in self.children[i]:
                walk(c)

        walk(0)
        return "\n".join(lines)


class TreePrefix:
    """Ancestor-closed subset of a tree's nodes, kept in prefix order."""

    def __init__(self, tree: DraftTree, kept_ids: Sequence[int]):
        self.tree = tree
        self.kept_ids: tuple[int, ...] = tuple(int(i) for i in kept_ids)
        kept = set(self.kept_ids)
        if 0 not in kept or len(kept) != len(self.kept_ids):
            raise InvariantError("prefix must contain the root exactly once")
        for i in self.kept_ids:
            par = tree.nodes[i].parent
            if par is not None and par not in kept:
                raise InvariantError(f"prefix is not ancestor-closed at node {i}")
        self._kept = frozenset(kept)
        self._kids = {i: tuple(c for c in tree.children[i] if c in kept) for i in self.kept_ids}
        self._activation: dict[int, ExpertActivation] = {}

    @property
    def k(self) -> int:
        return len(self.kept_ids)

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._kept

    def __len__(self) -> int:
        return self.k

    def kept_children(self, node_id: int) -> tuple[int, ...]:
        return self._kids[node_id]

    def contexts(self) -> list[tuple[int, ...]]:
        return [self.tree.context(i) for i in self.kept_ids]

    def activation(self, model: MoETarget) -> ExpertActivation:
        """Experts loaded when ``model`` verifies all kept nodes in one pass (memoised)."""
        act = self._activation.get(id(model))
        if act is None:
            act = self._activation[id(model)] = model.expert_union(self.contexts())
        return act


def build_tree(drafter: Drafter, root_token: int, root_context: Sequence[int],
               steps: int, topk: int) -> DraftTree:
    """Grow a well-structured tree with ``topk`` nodes on each of ``steps`` layers.

    Every node of the current layer proposes its ``topk`` most probable
    children; the layer keeps the ``topk`` candidates with the highest
    cumulative score (ties: parent order, then token id).
    """
    V = drafter.target.vocab_size
    if steps < 1 or topk < 1:
        raise ConfigError("steps and topk must be >= 1")
    if steps > MAX_DEPTH:
        raise ConfigError(f"steps={steps} exceeds depth guard {MAX_DEPTH}")
    if topk > V:
        raise ConfigError(f"topk={topk} exceeds vocabulary size {V}")

    root_context = tuple(int(t) for t in root_context)
    nodes = [TreeNode(0, None, int(root_token), 1.0, 1.0, 0, 0)]
    contexts = [root_context + (int(root_token),)]
    layer = [0]
    for depth in range(1, steps + 1):
        candidates = []
        for rank, nid in enumerate(layer):
            q = drafter.draft_dist(contexts[nid]).probs
            top = np.argsort(-q, kind="stable")[:topk]
            parent_score = nodes[nid].cum_score
            for tok in top:
                qp = float(q[tok])
                candidates.append((-(parent_score * qp), rank, int(tok), nid, qp))
        candidates.sort(key=lambda c: (c[0], c[1], c[2]))
        layer = []
        for _, _, tok, nid, qp in candidates[:topk]:
            i = len(nodes)
            nodes.append(TreeNode(i, nid, tok, qp, nodes[nid].cum_score * qp, depth, i))
            contexts.append(contexts[nid] + (tok,))
            layer.append(i)
    return DraftTree(nodes, root_context, {"steps": steps, "topk": topk})


def prefix_sequence(tree: DraftTree) -> list[int]:
    """All node ids ordered by (score descending, order_key ascending)."""
    return sorted(range(len(tree)), key=lambda i: (-tree.nodes[i].cum_score, tree.nodes[i].order_key))


def prune_topk(tree: DraftTree, k: int) -> TreePrefix:
    """Keep the ``k`` highest-scoring nodes.

    Scores never increase from parent to child and ties fall to the smaller
    order_key (parents are created first), so the result is ancestor-closed
    by construction; TreePrefix asserts it.
    """
    if not 1 <= k <= len(tree):
        raise InvalidInputError(f"k={k} outside [1, {len(tree)}]")
    return TreePrefix(tree, prefix_sequence(tree)[:k])
