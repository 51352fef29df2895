import sys
from pathlib import Path

import numpy as np
import pytest

from shapbench import numkit
from shapbench.blackbox import Model, linear_model
from shapbench.game import CoalitionGame, TableGame

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def two_player():
    # v(0)=0, v({1})=1, v({2})=2, v(F)=4; exact phi = (1.5, 2.5)
    return TableGame([0.0, 1.0, 2.0, 4.0])


def random_table_game(rng, m):
    return TableGame(rng.normal(size=1 << m))


def random_model(rng, m, k=2, hidden=(8,)):
    net = numkit.dense_net([m, *hidden, k], "relu", "softmax", 0.0, rng=rng)
    for layer in net.layers:
        layer.bias[:] = rng.normal(scale=0.1, size=layer.bias.shape)
    return Model.from_net(net)


def random_model_game(rng, m, n_background=8):
    model = random_model(rng, m)
    return CoalitionGame(model, rng.normal(size=m), rng.normal(size=(n_background, m)))


@pytest.fixture
def linear_game():
    """Linear model f(x) = w.x with zero-mean two-row background."""
    w = np.array([2.0, -1.0, 0.5])
    model = linear_model(w)
    background = np.array([[1.0, 2.0, -1.0], [-1.0, -2.0, 1.0]])
    x = np.array([0.3, 1.2, -2.0])
    return CoalitionGame(model, x, background, target_class=0), w, x, background


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, (ok, detail) in sorted(mod.RESULTS.items()):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
