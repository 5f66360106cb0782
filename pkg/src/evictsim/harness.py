"""End-to-end decoding loop, paired benchmarks and report emission.

The first token is drawn from the target at the prompt. Each speculative
iteration then grows a draft tree rooted at the newest token, scores its
prefixes, lets the policy choose a budget, verifies that prefix and commits
the accepted path plus a bonus token, which roots the next tree. An
iteration therefore adds ``accepted_len`` new tokens (root counted, since
the root's own emission was the previous bonus). The latency charged is the
simulated cost of the prefix actually verified.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .costmodel import (CostParams, CostTable, TreeParams, autoregressive_cost,
                        profile_costs, simulate_verify_cost)
from .distcore import Rng, sample
from .drafter import Drafter
from .drafttree import build_tree, prune_topk
from .errors import ConfigError
from .estimator import estimated_accept_prefix_sums
from .moetarget import MoEConfig, MoETarget
from .policy import PolicySpec
from .verifier import verify_greedy, verify_sampling

CSV_COLUMNS = ("step", "k_star", "verified_tokens", "accepted_len", "committed",
               "union_size_total", "sim_latency", "utility")

# Stream keys for Rng.derive so that prompts, decoding and profiling never share draws.
_PROMPT_STREAM = 1
_DECODE_STREAM = 2
_PROFILE_STREAM = 3


@dataclass(frozen=True)
class PromptSpec:
    count: int = 20
    length: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.count < 1 or self.length < 1:
            raise ConfigError("prompts need count >= 1 and length >= 1")


def _from_dict(cls, doc: Any, where: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for key, value in doc.items():
        sub = _NESTED.get((cls, key))
        kwargs[key] = _from_dict(sub, value, f"{where}.{key}") if sub else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    model: MoEConfig = field(default_factory=MoEConfig)
    alphas: tuple[float, ...] = (0.3, 0.6, 0.95)
    noise_scale: float = 2.0
    noise_seed: int = 1
    tree: TreeParams = field(default_factory=TreeParams)
    temperature: float = 1.0
    policy: str = "evict"
    policies: tuple[str, ...] = ("fixed:32", "evict")
    cost: CostParams = field(default_factory=CostParams)
    cost_table: str | None = None
    profile_iters: int = 200
    prompts: PromptSpec = field(default_factory=PromptSpec)
    max_new_tokens: int = 64
    seed: int = 0
    out_csv: str | None = None
    out_json: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "policies", tuple(self.policies))
        if not self.alphas or any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ConfigError("alphas must be a non-empty list of values in [0, 1]")
        if not self.temperature >= 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_new_tokens < 1:
            raise ConfigError("max_new_tokens must be >= 1")
        if self.profile_iters < 1:
            raise ConfigError("profile_iters must be >= 1")
        if self.tree.topk > self.model.vocab_size:
            raise ConfigError("tree.topk exceeds the vocabulary size")
        if self.tree.steps > 16:
            raise ConfigError("tree.steps exceeds the depth guard of 16")
        PolicySpec.parse(self.policy)
        for p in self.policies:
            PolicySpec.parse(p)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        return _from_dict(cls, doc, "config")

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alphas"] = list(self.alphas)
        d["policies"] = list(self.policies)
        return d

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_NESTED = {
    (RunConfig, "model"): MoEConfig,
    (RunConfig, "tree"): TreeParams,
    (RunConfig, "cost"): CostParams,
    (RunConfig, "prompts"): PromptSpec,
}


@dataclass(frozen=True)
class IterationStats:
    step: int
    k_star: int
    verified_tokens: int
    accepted_len: int
    committed: int
    union_size_total: int
    sim_latency: float
    utility: float

    def as_row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


class Simulator:
    """Model, drafters and cost table for one RunConfig, shared across prompts and policies."""

    def __init__(self, config: RunConfig, table: CostTable | None = None):
        self.config = config
        self.model = MoETarget(config.model)
        self._drafters: dict[float, Drafter] = {}
        if table is None and config.cost_table:
            table = CostTable.load(config.cost_table)
        self._table = table

    def drafter(self, alpha: float) -> Drafter:
        d = self._drafters.get(alpha)
        if d is None:
            d = Drafter(self.model, alpha, self.config.noise_seed, self.config.noise_scale)
            self._drafters[alpha] = d
        return d

    @property
    def table(self) -> CostTable:
        if self._table is None:
            self._table = self.profile()
        return self._table

    def profile(self, num_iters: int | None = None) -> CostTable:
        cfg = self.config
        alpha = float(np.mean(cfg.alphas))
        rng = Rng.derive(cfg.seed, _PROFILE_STREAM)
        return profile_costs(self.model, self.drafter(alpha), cfg.cost, cfg.tree,
                             num_iters or cfg.profile_iters, rng)

    def prompts(self) -> list[tuple[list[int], float]]:
        """Deterministic prompt set; prompt ``i`` uses ``alphas[i % len(alphas)]``."""
        spec = self.config.prompts
        out = []
        for i in range(spec.count):
            rng = Rng.derive(spec.seed, _PROMPT_STREAM, i)
            toks = [int(t) for t in rng.integers(0, self.config.model.vocab_size, size=spec.length)]
            out.append((toks, self.config.alphas[i % len(self.config.alphas)]))
        return out

    def _next_token(self, context: Sequence[int], rng: Rng) -> int:
        dist = self.model.target_dist(context, self.config.temperature)
        return dist.argmax() if self.config.temperature == 0 else sample(dist, rng)

    def decode(self, prompt: Sequence[int], rng: Rng, policy: PolicySpec | str | None = None,
               alpha: float | None = None) -> tuple[list[int], list[IterationStats]]:
        cfg = self.config
        policy = PolicySpec.parse(policy or cfg.policy) if not isinstance(policy, PolicySpec) else policy
        alpha = cfg.alphas[0] if alpha is None else alpha
        context = [int(t) for t in prompt]
        out: list[int] = []
        stats: list[IterationStats] = []
        table = self.table

        # The first root comes out of the prefill pass; afterwards each
        # iteration's bonus token is the next iteration's root.
        context.append(self._next_token(context, rng))
        out = [context[-1]]
        while len(out) < cfg.max_new_tokens:
            step = len(stats)
            if policy.kind == "autoregressive":
                # One target pass over the pending token yields exactly one new token.
                act = self.model.expert_union([context])
                latency = simulate_verify_cost(cfg.cost, 1, act, 0)
                tok = self._next_token(context, rng)
                stats.append(IterationStats(step, 1, 1, 1, 2, act.union_size_total, latency,
                                            table.ar_cost / latency))
                context.append(tok)
                out.append(tok)
                continue

            tree = build_tree(self.drafter(alpha), context[-1], context[:-1],
                              cfg.tree.steps, cfg.tree.topk)
            estimate = estimated_accept_prefix_sums(tree).truncated(len(table))
            decision = policy.decide(tree, estimate, table)
            prefix = prune_topk(tree, decision.k_star)
            if cfg.temperature == 0:
                result = verify_greedy(prefix, self.model)
            else:
                result = verify_sampling(prefix, self.model, cfg.temperature, rng)
            latency = simulate_verify_cost(cfg.cost, prefix.k, result.activation, cfg.tree.steps)
            stats.append(IterationStats(step, decision.k_star, prefix.k, result.accepted_len,
                                        len(result.committed_tokens),
                                        result.activation.union_size_total, latency,
                                        decision.utility))
            new = result.committed_tokens[1:]  # the root is already in the context
            context.extend(new)
            out.extend(new)
        return out[: cfg.max_new_tokens], stats


def decode(config: RunConfig, prompt: Sequence[int], rng: Rng, policy: str | None = None,
           alpha: float | None = None, table: CostTable | None = None):
    return Simulator(config, table).decode(prompt, rng, policy, alpha)


def greedy_reference(model: MoETarget, prompt: Sequence[int], n: int) -> list[int]:
    """Plain autoregressive argmax decoding."""
    context = list(prompt)
    for _ in range(n):
        context.append(model.target_dist(context, 0.0).argmax())
    return context[len(prompt):]


def aggregate(rows: Iterable[IterationStats], ar_cost: float) -> dict:
    rows = list(rows)
    n = len(rows)
    # Root + accepted drafts + bonus are committed, but the root was already
    # emitted by the previous pass, so each iteration adds accepted_len tokens.
    tokens = sum(r.accepted_len for r in rows)
    total_latency = float(sum(r.sim_latency for r in rows))
    tpot = total_latency / tokens
    return {
        "iterations": n,
        "tokens": tokens,
        "mat": tokens / n,
        "mean_committed": sum(r.committed for r in rows) / n,
        "mean_verified_tokens": sum(r.verified_tokens for r in rows) / n,
        "mean_union_size": sum(r.union_size_total for r in rows) / n,
        "mean_iteration_latency": total_latency / n,
        "total_latency": total_latency,
        "tpot": tpot,
        "tokens_per_unit_time": tokens / total_latency,
        "speedup_vs_ar": ar_cost / tpot,
    }


@dataclass
class PolicyResult:
    policy: str
    rows: list[IterationStats]
    by_prompt: list[tuple[float, list[IterationStats]]]
    outputs: list[list[int]]


@dataclass
class Report:
    config: RunConfig
    table: CostTable
    results: dict[str, PolicyResult]

    def summary(self, policy: str) -> dict:
        return aggregate(self.results[policy].rows, self.table.ar_cost)

    def by_alpha(self, policy: str) -> dict[float, dict]:
        groups: dict[float, list[IterationStats]] = defaultdict(list)
        for alpha, rows in self.results[policy].by_prompt:
            groups[alpha].extend(rows)
        return {a: aggregate(groups[a], self.table.ar_cost) for a in sorted(groups)}

    def subset(self, policy: str, max_alpha: float) -> dict:
        rows = [r for a, rs in self.results[policy].by_prompt if a <= max_alpha for r in rs]
        return aggregate(rows, self.table.ar_cost)

    def to_dict(self) -> dict:
        # Output paths do not affect results; leaving them out keeps the
        # report identical wherever it is written.
        config = {k: v for k, v in self.config.to_dict().items() if k not in ("out_csv", "out_json")}
        return {
            "config": config,
            "cost_table": self.table.to_dict(),
            "policies": {
                name: {
                    "overall": self.summary(name),
                    "by_alpha": {f"{a:g}": agg for a, agg in self.by_alpha(name).items()},
                }
                for name in self.results
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def csv_text(self, policy: str) -> str:
        return rows_to_csv(self.results[policy].rows)


def rows_to_csv(rows: Iterable[IterationStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r.as_row()])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[IterationStats]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ConfigError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for rec in reader:
        out.append(IterationStats(
            int(rec["step"]), int(rec["k_star"]), int(rec["verified_tokens"]),
            int(rec["accepted_len"]), int(rec["committed"]), int(rec["union_size_total"]),
            float(rec["sim_latency"]), float(rec["utility"])))
    return out


def run_policy(sim: Simulator, policy: str) -> PolicyResult:
    spec = PolicySpec.parse(policy)
    rows: list[IterationStats] = []
    by_prompt = []
    outputs = []
    for i, (prompt, alpha) in enumerate(sim.prompts()):
        # Same stream per prompt for every policy: paired comparison.
        rng = Rng.derive(sim.config.seed, _DECODE_STREAM, i)
        toks, stats = sim.decode(prompt, rng, spec, alpha)
        stats = [dataclasses.replace(s, step=len(rows) + j) for j, s in enumerate(stats)]
        rows.extend(stats)
        by_prompt.append((alpha, stats))
        outputs.append(toks)
    return PolicyResult(str(spec), rows, by_prompt, outputs)


def run_benchmark(config: RunConfig, policies: Sequence[str],
                  table: CostTable | None = None) -> Report:
    if not policies:
        raise ConfigError("run_benchmark needs at least one policy")
    sim = Simulator(config, table)
    results = {}
    for p in policies:
        res = run_policy(sim, p)
        results[res.policy] = res
    return Report(config, sim.table, results)


def sweep_tree_size(config: RunConfig, k_grid: Sequence[int],
                    table: CostTable | None = None) -> list[dict]:
    """Mean expert-union size and iteration latency for fixed budgets ``k_grid``."""
    if not k_grid or any(k < 1 or k > config.tree.max_prefix for k in k_grid):
        raise ConfigError(f"k_grid must lie within [1, {config.tree.max_prefix}]")
    sim = Simulator(config, table)
    out = []
    for k in k_grid:
        agg = aggregate(run_policy(sim, f"fixed:{int(k)}").rows, sim.table.ar_cost)
        out.append({"k": int(k), "mean_union_size": agg["mean_union_size"],
                    "mean_latency": agg["mean_iteration_latency"]})
    return out


def write_text(path, text: str) -> None:
    Path(path).write_text(text)
