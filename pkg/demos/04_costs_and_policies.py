# %% [markdown]
# # Profiled cost and the budget policies
#
# Iteration latency is simulated: a fixed overhead, a charge per draft step,
# a small charge per verified token and a charge per expert loaded. The cost
# C(k) of verifying k nodes is profiled once into a table. EVICT then picks
# the k that maximises estimated accepted length per unit of C(k).

# %%
import numpy as np

from evictsim import (CostParams, Drafter, MoETarget, PolicySpec, Rng, TreeParams, build_tree,
                      estimated_accept_prefix_sums, profile_costs)

model = MoETarget()
table = profile_costs(model, Drafter(model, 0.6), CostParams(), TreeParams(), 100, Rng(0))
print("C(k) for k = 1, 2, 4, 8, 16, 33:", [round(table.cost(k), 1) for k in (1, 2, 4, 8, 16, 33)])
print("autoregressive cost per token:", table.ar_cost)

# %% [markdown]
# ## One decision, in detail

# %%
context = [11, 22, 33, 44]
tree = build_tree(Drafter(model, 0.95), context[-1], context[:-1], 4, 8)
est = estimated_accept_prefix_sums(tree).truncated(len(table))
for spec in ("evict", "fixed:32", "coverage:0.7", "depthconf:0.1"):
    d = PolicySpec.parse(spec).decide(tree, est, table)
    print(f"{spec:<14} k*={d.k_star:>2}  utility {d.utility:.3f}")

# %% [markdown]
# ## Budget follows drafter quality
# Weak drafts make large trees a poor buy, so EVICT verifies less.

# %%
gen = np.random.default_rng(3)
contexts = [[int(t) for t in gen.integers(0, 64, size=5)] for _ in range(200)]
evict = PolicySpec.parse("evict")
for alpha in (0.3, 0.6, 0.95):
    drafter = Drafter(model, alpha)
    ks = [evict.decide(t, estimated_accept_prefix_sums(t).truncated(len(table)), table).k_star
          for t in (build_tree(drafter, c[-1], c[:-1], 4, 8) for c in contexts)]
    print(f"alpha {alpha}: mean k* {np.mean(ks):.2f}")
