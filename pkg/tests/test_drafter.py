import numpy as np
import pytest

from evictsim.distcore import tv_distance
from evictsim.drafter import Drafter
from evictsim.errors import ConfigError

from conftest import random_context

ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def test_alpha_one_is_target(model, gen):
    d = Drafter(model, alpha=1.0)
    for _ in range(100):
        ctx = random_context(gen, model.vocab_size)
        assert tv_distance(d.draft_dist(ctx), model.target_dist(ctx, 1.0)) == 0.0


def test_alpha_zero_differs_from_target(model, gen):
    d = Drafter(model, alpha=0.0)
    differs = sum(tv_distance(d.draft_dist(c), model.target_dist(c, 1.0)) > 0
                  for c in (random_context(gen, model.vocab_size) for _ in range(1000)))
    assert differs >= 990


@pytest.mark.parametrize("alpha", ALPHAS)
def test_draft_dist_valid(model, gen, alpha):
    d = Drafter(model, alpha=alpha)
    for _ in range(200):
        p = d.draft_dist(random_context(gen, model.vocab_size)).probs
        assert p.min() >= 0 and abs(p.sum() - 1) <= 1e-9


def test_mean_tv_non_increasing_in_alpha(model, gen):
    contexts = [random_context(gen, model.vocab_size) for _ in range(1000)]
    means = []
    for alpha in ALPHAS:
        d = Drafter(model, alpha=alpha)
        means.append(np.mean([tv_distance(d.draft_dist(c), model.target_dist(c)) for c in contexts]))
    assert all(a >= b for a, b in zip(means, means[1:]))


def test_deterministic_in_seed_and_recent_tokens(model):
    a, b = Drafter(model, 0.4, noise_seed=7), Drafter(model, 0.4, noise_seed=7)
    n = model.config.context_order
    tail = list(range(10, 10 + n))
    np.testing.assert_array_equal(a.draft_dist([1, 2] + tail).probs,
                                  b.draft_dist([50] + tail).probs)
    c = Drafter(model, 0.4, noise_seed=8)
    assert tv_distance(a.draft_dist(tail), c.draft_dist(tail)) > 0


def test_alpha_range_checked(model):
    with pytest.raises(ConfigError):
        Drafter(model, alpha=1.5)
