"""Independent reference computations and the oracle self-check suite.

Everything here is deliberately naive: brute-force enumeration, explicit
loops, plain autoregressive decoding. The helpers back the ``oracle`` CLI
subcommand and are reused by the test suite; none of them call the code
paths they are used to check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .distcore import Rng
from .drafttree import DraftTree, prune_topk


def random_tree(gen: np.random.Generator, n_nodes: int, vocab: int = 64,
                max_children: int | None = None) -> DraftTree:
    """Random tree whose sibling draft probabilities form a sub-distribution."""
    parents: list[int | None] = [None]
    for i in range(1, n_nodes):
        candidates = list(range(i))
        if max_children is not None:
            counts = np.bincount([p for p in parents[1:]], minlength=i)
            candidates = [c for c in candidates if counts[c] < max_children] or [i - 1]
        parents.append(int(gen.choice(candidates)))
    kids: dict[int, list[int]] = {}
    for i, p in enumerate(parents[1:], start=1):
        kids.setdefault(p, []).append(i)
    q = np.ones(n_nodes)
    tokens = np.zeros(n_nodes, dtype=int)
    tokens[0] = gen.integers(vocab)
    for p, cs in kids.items():
        w = gen.dirichlet(np.ones(len(cs) + 1))
        q[cs] = np.maximum(w[:-1], 1e-6)
        tokens[cs] = gen.choice(vocab, size=len(cs), replace=False)
    return DraftTree.from_parents(parents, tokens.tolist(), q.tolist())


def random_target_probs(tree: DraftTree, gen: np.random.Generator) -> np.ndarray:
    """Per-node target probabilities; siblings share one sub-distribution."""
    p = np.ones(len(tree))
    for v in range(len(tree)):
        cs = list(tree.children[v])
        if cs:
            p[cs] = gen.dirichlet(np.ones(len(cs) + 1))[:-1]
    return p


def closed_subset_best_sums(tree: DraftTree) -> dict[int, float]:
    """Maximum score sum over every ancestor-closed subset, by subset size.

    Walks nodes in id order and branches include/exclude, only allowing a
    node in when its parent is in, so every root-containing subtree is
    visited exactly once.
    """
    n = len(tree)
    parent = [v.parent for v in tree.nodes]
    score = [v.cum_score for v in tree.nodes]
    best: dict[int, float] = {}
    included = [False] * n
    included[0] = True

    def walk(i: int, size: int, total: float) -> None:
        if i == n:
            if total > best.get(size, -math.inf):
                best[size] = total
            return
        walk(i + 1, size, total)
        if included[parent[i]]:
            included[i] = True
            walk(i + 1, size + 1, total + score[i])
            included[i] = False

    walk(1, 1, score[0])
    return best


def naive_evict_k(sums: Sequence[float], costs: Sequence[float]) -> int:
    best_k, best = 1, -math.inf
    for k in range(1, len(sums) + 1):
        r = sums[k - 1] / costs[k - 1]
        if r > best:
            best_k, best = k, r
    return best_k


def brute_path_product_sum(tree: DraftTree, kept: Sequence[int], probs: Sequence[float]) -> float:
    total = 0.0
    for v in kept:
        prod = 1.0
        for u in tree.path(v)[1:]:
            prod *= probs[u]
        total += prod
    return total


def greedy_decode(model, prompt: Sequence[int], n: int) -> list[int]:
    context = list(prompt)
    out = []
    for _ in range(n):
        logits = model.logits(context)
        best = 0
        for i in range(1, len(logits)):
            if logits[i] > logits[best]:
                best = i
        out.append(best)
        context.append(best)
    return out


@dataclass
class OracleCheck:
    name: str
    passed: bool
    detail: str
    seconds: float


def _timed(name: str, fn: Callable[[], tuple[bool, str]]) -> OracleCheck:
    t0 = time.perf_counter()
    ok, detail = fn()
    return OracleCheck(name, ok, detail, time.perf_counter() - t0)


def run_oracle_suite(seed: int = 0, n_trees: int = 200) -> list[OracleCheck]:
    """Quick cross-checks of the estimator, pruning, policy and verifier against oracles."""
    from .estimator import enumerate_accept_oracle, exact_expected_accept_len, mc_accept_oracle
    from .harness import PromptSpec, RunConfig, Simulator
    from .moetarget import MoEConfig, MoETarget
    from .policy import select_prefix_evict
    from .costmodel import CostTable
    from .estimator import AcceptEstimate

    gen = np.random.default_rng(seed)

    def closed_form_vs_enumeration():
        worst = 0.0
        for _ in range(n_trees):
            tree = random_tree(gen, int(gen.integers(1, 13)))
            probs = random_target_probs(tree, gen)
            prefix = prune_topk(tree, int(gen.integers(1, len(tree) + 1)))
            worst = max(worst, abs(exact_expected_accept_len(prefix, probs)
                                   - enumerate_accept_oracle(prefix, probs)))
        return worst <= 1e-9, f"max |diff| = {worst:.3g}"

    def pruning_optimality():
        bad = 0
        for _ in range(n_trees):
            tree = random_tree(gen, int(gen.integers(1, 13)))
            best = closed_subset_best_sums(tree)
            for k in range(1, len(tree) + 1):
                got = sum(tree.nodes[i].cum_score for i in prune_topk(tree, k).kept_ids)
                bad += abs(got - best[k]) > 1e-12
        return bad == 0, f"{bad} suboptimal prefixes"

    def evict_argmax():
        bad = 0
        for _ in range(1000):
            n = int(gen.integers(1, 34))
            s = np.cumsum(gen.uniform(0.01, 1.0, n))
            c = np.sort(gen.uniform(1.0, 100.0, n))
            table = CostTable(tuple(c), 1.0)
            bad += select_prefix_evict(AcceptEstimate(s), table).k_star != naive_evict_k(s, c)
        return bad == 0, f"{bad} mismatches"

    def verifier_vs_closed_form():
        model = MoETarget(MoEConfig(vocab_size=8, num_layers=2, num_experts=8, active_experts=2,
                                    hidden_dim=8, seed=seed))
        worst = 0.0
        for t in range(5):
            tree = random_tree(gen, 6, vocab=8)
            prefix = prune_topk(tree, len(tree))
            probs = np.ones(len(tree))
            for v in tree.nodes[1:]:
                probs[v.id] = model.target_dist(tree.context(v.parent))[v.token]
            exact = exact_expected_accept_len(prefix, probs)
            mean, se = mc_accept_oracle(prefix, model, Rng.derive(seed, 77, t), 20000)
            worst = max(worst, abs(mean - exact) / max(se, 1e-12))
        return worst <= 4.0, f"max deviation {worst:.2f} standard errors"

    def greedy_lossless():
        cfg = RunConfig(temperature=0.0, prompts=PromptSpec(count=5, seed=seed),
                        max_new_tokens=32, profile_iters=20)
        sim = Simulator(cfg)
        bad = 0
        for i, (prompt, alpha) in enumerate(sim.prompts()):
            ref = greedy_decode(sim.model, prompt, cfg.max_new_tokens)
            for pol in ("evict", "fixed:32", "coverage:0.5", "depthconf:0.2"):
                toks, _ = sim.decode(prompt, Rng.derive(seed, i), pol, alpha)
                bad += toks != ref
        return bad == 0, f"{bad} divergent outputs"

    return [
        _timed("closed-form accepted length == enumeration", closed_form_vs_enumeration),
        _timed("top-k pruning is optimal among closed subsets", pruning_optimality),
        _timed("utility argmax == naive loop", evict_argmax),
        _timed("verifier accepted length ~ closed form", verifier_vs_closed_form),
        _timed("greedy speculative output == greedy decoding", greedy_lossless),
    ]
