"""Acceptance suite: the ten release criteria at their stated tolerances.

Each criterion is a plain function returning ``(passed, detail)``. The pytest
wrappers assert on it and record one line per criterion; the lines are
printed in the terminal summary. Running this file directly prints the same
lines without pytest.
"""

from __future__ import annotations

import json
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from evictsim.cli import main as cli_main
from evictsim.costmodel import CostParams, CostTable, TreeParams, profile_costs, simulate_verify_cost
from evictsim.distcore import Rng, tv_distance
from evictsim.drafter import Drafter
from evictsim.drafttree import DraftTree, build_tree, prefix_sequence, prune_topk
from evictsim.estimator import (AcceptEstimate, enumerate_accept_oracle,
                                estimated_accept_prefix_sums, exact_expected_accept_len)
from evictsim.harness import PromptSpec, RunConfig, Simulator, run_benchmark
from evictsim.moetarget import MoEConfig, MoETarget
from evictsim.oracles import (closed_subset_best_sums, greedy_decode, naive_evict_k,
                              random_target_probs, random_tree)
from evictsim.policy import select_depth_confidence, select_prefix_coverage, select_prefix_evict
from evictsim.verifier import target_path_probs, verify_sampling

RESULTS: list[str] = []


def c1_closed_form_equals_enumeration():
    gen = np.random.default_rng(1)
    worst = 0.0
    for _ in range(500):
        tree = random_tree(gen, int(gen.integers(1, 13)))
        probs = random_target_probs(tree, gen)
        prefix = prune_topk(tree, int(gen.integers(1, len(tree) + 1)))
        worst = max(worst, abs(exact_expected_accept_len(prefix, probs)
                               - enumerate_accept_oracle(prefix, probs)))
    return worst <= 1e-9, f"max |closed form - enumeration| = {worst:.2e} (tol 1e-9)"


def c2_sampling_losslessness():
    model = MoETarget(MoEConfig(vocab_size=6, num_layers=2, num_experts=8, active_experts=2,
                                hidden_dim=8, context_order=3, seed=2))
    drafter = Drafter(model, alpha=0.5)
    gen = np.random.default_rng(2)
    worst = 0.0
    for n_children in (2, 3, 4):
        ctx = [int(t) for t in gen.integers(0, 6, size=4)]
        tree = build_tree(drafter, ctx[-1], ctx[:-1], steps=1, topk=n_children)
        prefix = prune_topk(tree, len(tree))
        rng = Rng.derive(2, n_children)
        counts = np.zeros(6)
        for _ in range(200_000):
            res = verify_sampling(prefix, model, 1.0, rng)
            first = (tree.nodes[res.accepted_path[1]].token if res.accepted_len > 1
                     else res.bonus_token)
            counts[first] += 1
        target = model.target_dist(tree.context(0), 1.0).probs
        worst = max(worst, tv_distance(counts / counts.sum(), target))
    return worst < 0.01, f"max TV over 3 prefixes (2-4 children, 2e5 trials) = {worst:.4f} (tol 0.01)"


def c3_greedy_losslessness():
    cfg = RunConfig(temperature=0.0, prompts=PromptSpec(count=50, length=8, seed=3),
                    max_new_tokens=32, profile_iters=20, seed=3)
    sim = Simulator(cfg)
    policies = ["evict", "fixed:32", "coverage:0.7", "depthconf:0.1", "autoregressive"]
    bad = 0
    for i, (prompt, alpha) in enumerate(sim.prompts()):
        ref = greedy_decode(sim.model, prompt, cfg.max_new_tokens)
        for p in policies:
            toks, _ = sim.decode(prompt, Rng.derive(3, i), p, alpha)
            bad += toks != ref
    return bad == 0, f"{bad} divergent outputs over 50 prompts x {len(policies)} policies"


def c4_pruning_optimality():
    gen = np.random.default_rng(4)
    checked = bad = 0
    for _ in range(1000):
        tree = random_tree(gen, int(gen.integers(1, 13)))
        best = closed_subset_best_sums(tree)
        for k in range(1, len(tree) + 1):
            got = sum(tree.nodes[i].cum_score for i in prune_topk(tree, k).kept_ids)
            checked += 1
            bad += abs(got - best[k]) > 1e-12
    return bad == 0, f"{bad}/{checked} (tree, k) pairs below the exhaustive maximum"


def c5_argmax_fidelity():
    gen = np.random.default_rng(5)
    mismatches = scale_breaks = 0
    for _ in range(10_000):
        n = int(gen.integers(1, 34))
        s = np.cumsum(gen.uniform(0.001, 1.0, n))
        c = np.sort(gen.uniform(1.0, 200.0, n))
        k = select_prefix_evict(AcceptEstimate(s), CostTable(tuple(c), 1.0)).k_star
        mismatches += k != naive_evict_k(s, c)
        a, b = gen.uniform(0.01, 100.0, 2)
        scale_breaks += select_prefix_evict(AcceptEstimate(s), CostTable(tuple(c * a), 1.0)).k_star != k
        scale_breaks += select_prefix_evict(AcceptEstimate(s * b), CostTable(tuple(c), 1.0)).k_star != k
    ok = mismatches == 0 and scale_breaks == 0
    return ok, f"{mismatches} naive-loop mismatches, {scale_breaks} scale-invariance breaks in 1e4 pairs"


def c6_calibration_coincidence():
    model = MoETarget()
    drafter = Drafter(model, alpha=1.0)
    gen = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        ctx = [int(t) for t in gen.integers(0, model.vocab_size, size=6)]
        tree = build_tree(drafter, ctx[-1], ctx[:-1], 4, 8)
        est = estimated_accept_prefix_sums(tree).prefix_sums
        full = prune_topk(tree, len(tree))
        probs = target_path_probs(full, model, 1.0)
        for k in range(1, len(tree) + 1):
            worst = max(worst, abs(est[k - 1] - exact_expected_accept_len(prune_topk(tree, k), probs)))
    return worst <= 1e-9, f"max |S_hat[k] - exact| = {worst:.2e} over 100 trees, all k (tol 1e-9)"


def c7_monotonicity():
    model = MoETarget()
    drafter = Drafter(model, alpha=0.6)
    params = CostParams()
    gen = np.random.default_rng(7)
    union_bad = cost_bad = rho_bad = depth_bad = 0
    rhos = np.linspace(0.05, 1.0, 20)
    thresholds = np.linspace(0.0, 1.0, 21)
    for _ in range(100):
        ctx = [int(t) for t in gen.integers(0, model.vocab_size, size=6)]
        tree = build_tree(drafter, ctx[-1], ctx[:-1], 4, 8)
        order = prefix_sequence(tree)
        unions, costs = [], []
        for k in range(1, len(order) + 1):
            act = model.expert_union([tree.context(i) for i in order[:k]])
            unions.append(act.union_size_total)
            costs.append(simulate_verify_cost(params, k, act, 4))
        union_bad += bool(np.any(np.diff(unions) < 0))
        cost_bad += bool(np.any(np.diff(costs) < 0))
        est = estimated_accept_prefix_sums(tree)
        ks = [select_prefix_coverage(est, r).k_star for r in rhos]
        rho_bad += ks != sorted(ks)
        kept = [select_depth_confidence(tree, t).k_star for t in thresholds]
        depths = [next(d for d in range(len(tree.layer_index))
                       if sum(len(x) for x in tree.layer_index[: d + 1]) == k) for k in kept]
        depth_bad += depths != sorted(depths, reverse=True)
    table = profile_costs(model, drafter, params, TreeParams(), 50, Rng(7))
    table_bad = int(np.any(np.diff(table.per_k) < 0))
    ok = union_bad == cost_bad == rho_bad == depth_bad == table_bad == 0
    return ok, (f"violations: union {union_bad}, C(k) {cost_bad}, profiled table {table_bad}, "
                f"coverage-rho {rho_bad}, depth-threshold {depth_bad} (100 trees)")


def c8_trend_reproduction():
    # Temperature 1: see the ledger entry on why greedy decoding is not used here.
    cfg = RunConfig(alphas=(0.3, 0.6, 0.95), temperature=1.0, cost=CostParams.expert_dominated(),
                    prompts=PromptSpec(count=60, length=8, seed=8), max_new_tokens=256,
                    policies=("fixed:32", "evict"), seed=8)
    report = run_benchmark(cfg, ["fixed:32", "evict"])
    f, e = report.summary("fixed:32"), report.summary("evict")
    f_low, e_low = report.subset("fixed:32", 0.5), report.subset("evict", 0.5)
    gain_low = 1.0 - e_low["tpot"] / f_low["tpot"]
    checks = {
        "verified": e["mean_verified_tokens"] < f["mean_verified_tokens"],
        "union": e["mean_union_size"] < f["mean_union_size"],
        "latency": e["mean_iteration_latency"] < f["mean_iteration_latency"],
        "tpot": e["tpot"] <= f["tpot"],
        "low-alpha gain": gain_low >= 0.05,
    }
    detail = (f"verified {e['mean_verified_tokens']:.2f} vs {f['mean_verified_tokens']:.2f}, "
              f"union {e['mean_union_size']:.1f} vs {f['mean_union_size']:.1f}, "
              f"latency {e['mean_iteration_latency']:.1f} vs {f['mean_iteration_latency']:.1f}, "
              f"TPOT {e['tpot']:.2f} vs {f['tpot']:.2f}, alpha<=0.5 TPOT gain {100 * gain_low:.1f}%")
    failed = [k for k, v in checks.items() if not v]
    return not failed, detail + (f"; failed: {failed}" if failed else "")


def c9_profiling_stability():
    model = MoETarget()
    drafter = Drafter(model, alpha=0.6)
    params, tree = CostParams(), TreeParams()
    few = np.asarray(profile_costs(model, drafter, params, tree, 10, Rng(9)).per_k)
    many = np.asarray(profile_costs(model, drafter, params, tree, 1000, Rng(9)).per_k)
    rel = float(np.max(np.abs(few / many - 1.0)))
    a = profile_costs(model, drafter, params, tree, 50, Rng(99))
    b = profile_costs(model, drafter, params, tree, 50, Rng(99))
    identical = json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    return rel <= 0.20 and identical, (f"max relative gap 10 vs 1000 iters = {100 * rel:.1f}% (tol 20%), "
                                       f"same-seed tables bit-identical: {identical}")


def c10_cli_determinism():
    small = {"prompts": {"count": 6, "length": 8, "seed": 0}, "max_new_tokens": 48,
             "profile_iters": 20}
    commands = {
        "profile": ["profile"],
        "run": ["run", "--policy", "evict"],
        "compare": ["compare", "--policy", "fixed:32", "--policy", "evict",
                    "--policy", "coverage:0.7"],
        "sweep": ["sweep", "--k-grid", "1,2,4,8,16,32"],
    }
    differing = []
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        config = root / "config.json"
        config.write_text(json.dumps(small))
        for name, cmd in commands.items():
            blobs = []
            for rep in range(2):
                out = root / f"{name}{rep}"
                out.mkdir()
                code = cli_main(cmd + ["--config", str(config), "--seed", "10",
                                       "--out-csv", str(out / "o.csv"),
                                       "--out-json", str(out / "o.json")])
                if code != 0:
                    return False, f"{name} exited with {code}"
                blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
            if blobs[0] != blobs[1] or not blobs[0]:
                differing.append(name)
    return not differing, (f"{len(commands)} subcommands run twice; byte-identical outputs"
                           if not differing else f"outputs differ for {differing}")


CRITERIA = [
    (1, "closed-form accepted length equals enumeration", c1_closed_form_equals_enumeration, 30),
    (2, "losslessness under sampling", c2_sampling_losslessness, 60),
    (3, "losslessness under greedy decoding", c3_greedy_losslessness, 30),
    (4, "top-k pruning optimality", c4_pruning_optimality, 60),
    (5, "utility argmax fidelity", c5_argmax_fidelity, None),
    (6, "calibration coincidence", c6_calibration_coincidence, None),
    (7, "monotonicity suite", c7_monotonicity, None),
    (8, "trend reproduction, fixed:32 vs evict", c8_trend_reproduction, 300),
    (9, "profiling stability", c9_profiling_stability, None),
    (10, "CLI determinism", c10_cli_determinism, None),
]


def run_criterion(number, title, fn, budget):
    t0 = time.perf_counter()
    ok, detail = fn()
    secs = time.perf_counter() - t0
    if budget is not None and secs >= budget:
        ok = False
        detail += f"; runtime {secs:.1f}s exceeds {budget}s"
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {title}: {detail} ({secs:.1f}s)"
    return ok, line


@pytest.mark.acceptance
@pytest.mark.parametrize("number,title,fn,budget", CRITERIA, ids=[f"criterion{c[0]}" for c in CRITERIA])
def test_criterion(number, title, fn, budget):
    ok, line = run_criterion(number, title, fn, budget)
    RESULTS.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    failures = 0
    for crit in CRITERIA:
        ok, line = run_criterion(*crit)
        failures += not ok
        print(line, flush=True)
    sys.exit(1 if failures else 0)
