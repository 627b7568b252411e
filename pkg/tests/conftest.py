import sys
from pathlib import Path

import numpy as np
import pytest

import shapkit as sk

DOUBLES = Path(__file__).parent / "doubles"
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def linear_data():
    return sk.generate_synthetic("linear", 400, seed=1)


@pytest.fixture(scope="session")
def rbf_model(linear_data):
    return sk.train_rbf_classifier(linear_data, gamma=2.0, lam=1e-3)


@pytest.fixture
def linear_ctx():
    """a=(2,3), x=(1,1), zero background: the additive two-feature game."""
    return sk.ValueFunctionContext(sk.LinearModel([2.0, 3.0]), [1.0, 1.0], [0.0, 0.0])


def double_cmd(name, *args):
    return [sys.executable, str(DOUBLES / name), *args]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
