import numpy as np
import pytest

from evictsim import Drafter, MoEConfig, MoETarget

SMALL = MoEConfig(vocab_size=8, num_layers=2, num_experts=8, active_experts=2, hidden_dim=8,
                  context_order=3, seed=11)


@pytest.fixture(scope="session")
def model():
    return MoETarget()


@pytest.fixture(scope="session")
def small_model():
    return MoETarget(SMALL)


@pytest.fixture(scope="session")
def calibrated(model):
    return Drafter(model, alpha=1.0)


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


def random_context(gen, vocab, length=6):
    return [int(t) for t in gen.integers(0, vocab, size=length)]


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
