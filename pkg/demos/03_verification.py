# %% [markdown]
# # Verifying a prefix
#
# Children are tried in order. A child is accepted with its current target
# probability; a rejected child's token is removed and the rest of the
# distribution is rescaled. When nothing is accepted, a bonus token is drawn
# from what remains. Each token therefore ends up committed with exactly its
# target probability.

# %%
import numpy as np

from evictsim import (Drafter, MoETarget, Rng, build_tree, prune_topk, tv_distance,
                      verify_greedy, verify_sampling)

model = MoETarget()
context = [1, 2, 3, 4]
tree = build_tree(Drafter(model, alpha=0.5), context[-1], context[:-1], steps=1, topk=4)
prefix = prune_topk(tree, len(tree))
res = verify_sampling(prefix, model, 1.0, Rng(0))
print("accepted path", res.accepted_path, "committed", res.committed_tokens)
print("expert loads for the batch:", res.activation.union_size_total)

# %% [markdown]
# ## The first committed token follows the target
# Counting the first token after the root over many runs reproduces the
# target distribution.

# %%
rng = Rng(1)
counts = np.zeros(model.vocab_size)
for _ in range(50_000):
    r = verify_sampling(prefix, model, 1.0, rng)
    counts[tree.nodes[r.accepted_path[1]].token if r.accepted_len > 1 else r.bonus_token] += 1
print("TV to target:", round(tv_distance(counts / counts.sum(), model.target_dist(tree.context(0))), 4))

# %% [markdown]
# ## Greedy mode
# At temperature 0 a child survives only if it is the target argmax.

# %%
g = verify_greedy(prefix, model)
print("greedy accepted", g.accepted_len, "bonus", g.bonus_token)
