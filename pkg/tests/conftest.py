import numpy as np
import pytest

from posr.envs import generate_random_game
from posr.game import InducedMdp, induce_mdp

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_policy(rng, N, A, floor=0.0):
    p = rng.dirichlet(np.ones(A), size=N) + floor
    return p / p.sum(-1, keepdims=True)


def random_mdp(rng, H=3, width=2, A=3) -> InducedMdp:
    """A single-agent layered MDP drawn through the one-player game generator."""
    game = generate_random_game(1, H, width, A, rng, allow_large=True)
    return induce_mdp(game, game.uniform_profile(), 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
