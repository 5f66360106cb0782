# %% [markdown]
# # Paired benchmark: fixed budget against EVICT
#
# Every policy decodes the same prompts with the same random streams, so
# differences come from the budget choice alone. This is the library form of
# `evictsim compare`.

# %%
from evictsim import RunConfig, run_benchmark, sweep_tree_size
from evictsim.harness import PromptSpec

cfg = RunConfig(prompts=PromptSpec(count=12, length=8, seed=0), max_new_tokens=96)
report = run_benchmark(cfg, ["autoregressive", "fixed:32", "coverage:0.7", "evict"])
print(f"{'policy':<16}{'MAT':>7}{'verified':>10}{'union':>8}{'TPOT':>8}{'speedup':>9}")
for name in report.results:
    s = report.summary(name)
    print(f"{name:<16}{s['mat']:>7.2f}{s['mean_verified_tokens']:>10.2f}"
          f"{s['mean_union_size']:>8.1f}{s['tpot']:>8.2f}{s['speedup_vs_ar']:>9.3f}")

# %% [markdown]
# ## By drafter quality

# %%
for name in ("fixed:32", "evict"):
    for alpha, s in report.by_alpha(name).items():
        print(f"{name:<10} alpha {alpha:<5} TPOT {s['tpot']:.2f}  verified {s['mean_verified_tokens']:.1f}")

# %% [markdown]
# ## Tree size sweep
# Expert union and latency for fixed budgets, the shape that motivates the
# whole approach.

# %%
for row in sweep_tree_size(cfg, [1, 2, 4, 8, 16, 32], report.table):
    print(row)
