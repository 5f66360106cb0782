"""Command-line entry point: ``evictsim {profile,run,compare,sweep,oracle}``.

Exit codes: 0 success, 2 configuration error, 3 invariant or oracle
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .costmodel import CostTable
from .errors import ConfigError, InvariantError
from .harness import RunConfig, Simulator, run_benchmark, sweep_tree_size

log = logging.getLogger("evictsim")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_IO = 0, 2, 3, 4


class _IOFailure(Exception):
    def __init__(self, path, exc):
        super().__init__(f"{path}: {exc}")


def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise _IOFailure(path, exc) from exc


def _read_table(path) -> CostTable:
    try:
        return CostTable.load(path)
    except OSError as exc:
        raise _IOFailure(path, exc) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _load_config(args) -> RunConfig:
    if args.config:
        try:
            cfg = RunConfig.load(args.config)
        except OSError as exc:
            raise _IOFailure(args.config, exc) from exc
    else:
        cfg = RunConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "out_csv", None):
        changes["out_csv"] = args.out_csv
    if getattr(args, "out_json", None):
        changes["out_json"] = args.out_json
    if getattr(args, "cost_table", None):
        changes["cost_table"] = args.cost_table
    return cfg.replace(**changes) if changes else cfg


def _table_for(cfg: RunConfig) -> CostTable | None:
    return _read_table(cfg.cost_table) if cfg.cost_table else None


def _slug(policy: str) -> str:
    return policy.replace(":", "-")


def cmd_profile(args) -> int:
    cfg = _load_config(args)
    table = Simulator(cfg).profile(args.iters)
    text = json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n"
    if cfg.out_json:
        _write(cfg.out_json, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _emit_report(report, cfg: RunConfig, policies) -> None:
    if cfg.out_json:
        _write(cfg.out_json, report.to_json())
    if cfg.out_csv:
        if len(policies) == 1:
            _write(cfg.out_csv, report.csv_text(policies[0]))
        else:
            base = Path(cfg.out_csv)
            for p in policies:
                _write(base.with_name(f"{base.stem}.{_slug(p)}{base.suffix}"), report.csv_text(p))
    header = f"{'policy':<16}{'MAT':>8}{'verified':>10}{'union':>9}{'iter_lat':>10}{'TPOT':>9}{'speedup':>9}"
    print(header)
    for p in policies:
        s = report.summary(p)
        print(f"{p:<16}{s['mat']:>8.3f}{s['mean_verified_tokens']:>10.2f}{s['mean_union_size']:>9.2f}"
              f"{s['mean_iteration_latency']:>10.2f}{s['tpot']:>9.3f}{s['speedup_vs_ar']:>9.3f}")


def cmd_run(args) -> int:
    cfg = _load_config(args)
    policy = args.policy[-1] if args.policy else cfg.policy
    cfg = cfg.replace(policy=policy)
    report = run_benchmark(cfg, [policy], _table_for(cfg))
    _emit_report(report, cfg, list(report.results))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    policies = args.policy or list(cfg.policies)
    cfg = cfg.replace(policies=tuple(policies))
    report = run_benchmark(cfg, policies, _table_for(cfg))
    _emit_report(report, cfg, list(report.results))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        grid = [int(x) for x in args.k_grid.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad --k-grid {args.k_grid!r}") from None
    rows = sweep_tree_size(cfg, grid, _table_for(cfg))
    lines = ["k,mean_union_size,mean_latency"]
    lines += [f"{r['k']},{r['mean_union_size']!r},{r['mean_latency']!r}" for r in rows]
    text = "\n".join(lines) + "\n"
    if cfg.out_csv:
        _write(cfg.out_csv, text)
    if cfg.out_json:
        _write(cfg.out_json, json.dumps({"sweep": rows}, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .oracles import run_oracle_suite

    checks = run_oracle_suite(seed=args.seed or 0)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail} ({c.seconds:.1f}s)")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evictsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, outputs=True):
        p.add_argument("--config", help="RunConfig JSON file")
        p.add_argument("--seed", type=int)
        if outputs:
            p.add_argument("--out-csv")
            p.add_argument("--out-json")
            p.add_argument("--cost-table", help="profiled cost table JSON to reuse")

    p = sub.add_parser("profile", help="profile C(k) and write the cost table")
    common(p)
    p.add_argument("--iters", type=int, help="profiling iterations (default: config)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("run", help="decode the prompt set with one policy")
    common(p)
    p.add_argument("--policy", action="append")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="paired multi-policy report")
    common(p)
    p.add_argument("--policy", action="append", help="repeat for each policy")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="expert union and latency versus fixed budget")
    common(p)
    p.add_argument("--k-grid", default="1,2,4,8,16,32")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="run the oracle self-checks")
    common(p, outputs=False)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantError, AssertionError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except _IOFailure as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("wall clock %.2fs", time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
