# %% [markdown]
# # The synthetic MoE target and its drafter
#
# The target model routes every token's hidden state to a few experts on
# each layer. Its next-token distribution is exact, so verification can be
# checked against it directly. The drafter is a blend of that distribution
# with a context-seeded perturbation; `alpha` sets how close the two are.

# %%
import numpy as np

from evictsim import Drafter, MoETarget, tv_distance

model = MoETarget()
cfg = model.config
print(f"vocab {cfg.vocab_size}, layers {cfg.num_layers}, "
      f"experts {cfg.num_experts} with {cfg.active_experts} active per token")

# %% [markdown]
# ## Routing one token
# `routed_experts` returns one row of expert ids per layer.

# %%
context = [3, 17, 42, 8]
print(model.routed_experts(context))
p = model.target_dist(context)
print("top-5 target tokens:", np.argsort(-p.probs)[:5], "mass", np.sort(p.probs)[-5:].sum().round(3))

# %% [markdown]
# ## Expert union grows with the verified batch
# A single token loads L x k_act experts. Verifying more tokens together
# loads the union of their experts, which grows quickly at first and then
# saturates.

# %%
gen = np.random.default_rng(0)
batch = [[int(t) for t in gen.integers(0, cfg.vocab_size, size=4)] for _ in range(32)]
for n in (1, 2, 4, 8, 16, 32):
    print(f"{n:>3} tokens -> {model.expert_union(batch[:n]).union_size_total:>4} expert loads")

# %% [markdown]
# ## Drafter calibration
# Total variation from the target shrinks as alpha rises, reaching zero at alpha = 1.

# %%
for alpha in (0.0, 0.3, 0.6, 0.95, 1.0):
    d = Drafter(model, alpha)
    tv = np.mean([tv_distance(d.draft_dist(c), model.target_dist(c)) for c in batch])
    print(f"alpha {alpha:<5} mean TV to target {tv:.3f}")
