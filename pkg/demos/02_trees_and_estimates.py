# %% [markdown]
# # Draft trees, pruning and the accepted-length estimate
#
# A tree is grown layer by layer, keeping `topk` nodes per layer. Each node's
# score is the product of draft probabilities on its path. Keeping the k
# highest-scoring nodes always yields a valid subtree, and the running sum of
# those scores estimates how many tokens verification will accept.

# %%
import numpy as np

from evictsim import (Drafter, MoETarget, build_tree, enumerate_accept_oracle,
                      estimated_accept_prefix_sums, exact_expected_accept_len, prune_topk,
                      target_path_probs)

model = MoETarget()
context = [5, 9, 12, 30, 7]
tree = build_tree(Drafter(model, alpha=0.6), context[-1], context[:-1], steps=3, topk=3)
print(tree.to_text())

# %% [markdown]
# ## Prefix sums
# Entry k-1 is the estimated accepted length when the top-k prefix is verified.

# %%
est = estimated_accept_prefix_sums(tree)
print(np.round(est.prefix_sums, 3))

# %% [markdown]
# ## Estimate versus the exact expectation
# The exact value replaces draft probabilities by target probabilities. A
# brute-force recursion over the verification process gives the same number.

# %%
probs = target_path_probs(prune_topk(tree, len(tree)), model)
for k in (1, 3, 6, len(tree)):
    prefix = prune_topk(tree, k)
    exact = exact_expected_accept_len(prefix, probs)
    brute = enumerate_accept_oracle(prefix, probs)
    print(f"k={k:>2}  estimate {est.prefix_sums[k - 1]:.3f}  exact {exact:.3f}  recursion {brute:.3f}")

# %% [markdown]
# With a perfectly calibrated drafter (alpha = 1) the estimate and the
# exact value coincide.

# %%
tree1 = build_tree(Drafter(model, alpha=1.0), context[-1], context[:-1], steps=3, topk=3)
p1 = target_path_probs(prune_topk(tree1, len(tree1)), model)
gap = max(abs(estimated_accept_prefix_sums(tree1).prefix_sums[k - 1]
              - exact_expected_accept_len(prune_topk(tree1, k), p1)) for k in range(1, len(tree1) + 1))
print("max gap at alpha=1:", gap)
