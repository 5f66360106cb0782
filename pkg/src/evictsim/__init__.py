"""Simulator and policy library for expert-aware adaptive verification in
MoE speculative decoding."""

from .costmodel import CostParams, CostTable, TreeParams, profile_costs, simulate_verify_cost
from .distcore import Distribution, Rng, sample, softmax_temp, tv_distance
from .drafter import Drafter
from .drafttree import DraftTree, TreeNode, TreePrefix, build_tree, prefix_sequence, prune_topk
from .errors import ConfigError, InvalidInputError, InvariantError
from .estimator import (AcceptEstimate, enumerate_accept_oracle, estimated_accept_prefix_sums,
                        exact_expected_accept_len, mc_accept_oracle)
from .harness import RunConfig, Simulator, decode, run_benchmark, sweep_tree_size
from .moetarget import ExpertActivation, MoEConfig, MoETarget
from .policy import (PolicyDecision, PolicySpec, select_depth_confidence, select_prefix_coverage,
                     select_prefix_evict, select_prefix_fixed)
from .verifier import VerifyResult, target_path_probs, verify_greedy, verify_sampling

__version__ = "0.1.0"
