"""Game generators and the scripted non-stationary FTRL counterexample."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import InducedMdp, MarkovGame, MdpHistory, array_history
from .independent import IndependentGame

log = logging.getLogger(__name__)

ROW_FLOOR = 0.05
MAX_PLAYERS = 4
MAX_ACTIONS = 4
MAX_STATES = 12


def _layer_sizes(H: int, states_per_layer) -> list[int]:
    """Sizes of layers 0..H: singleton start, the requested decision layers, singleton terminal."""
    if isinstance(states_per_layer, (int, np.integer)):
        inner = [int(states_per_layer)] * (H - 1)
    else:
        inner = [int(k) for k in states_per_layer]
        if len(inner) != H - 1:
            raise ValueError(f"need {H - 1} layer sizes for H={H}, got {len(inner)}")
    if any(k < 1 for k in inner):
        raise ValueError("layer sizes must be positive")
    return [1, *inner, 1]


def _layers_from_sizes(sizes: list[int]) -> list[list[int]]:
    out, nxt = [], 0
    for k in sizes:
        out.append(list(range(nxt, nxt + k)))
        nxt += k
    return out


def _floored_dirichlet(rng, n_rows: int, width: int) -> np.ndarray:
    rows = rng.dirichlet(np.ones(width), size=n_rows)
    rows = np.maximum(rows, ROW_FLOOR)
    return rows / rows.sum(-1, keepdims=True)


def generate_random_game(m: int, H: int, states_per_layer, A, rng, *, allow_large=False) -> MarkovGame:
    """Random layered game: Dirichlet(1) transition rows floored at 0.05, uniform [0, 1] losses.

    ``A`` is an int (every player) or one count per player.
    """
    actions = (int(A),) * m if np.isscalar(A) else tuple(int(a) for a in A)
    if len(actions) != m:
        raise ValueError(f"{len(actions)} action counts for {m} players")
    sizes = _layer_sizes(H, states_per_layer)
    S = sum(sizes[:-1])
    if not allow_large and (m > MAX_PLAYERS or max(actions) > MAX_ACTIONS or S > MAX_STATES):
        raise ValueError(
            f"instance (m={m}, A={max(actions)}, S={S}) exceeds desk-scale bounds "
            f"(m <= {MAX_PLAYERS}, A <= {MAX_ACTIONS}, S <= {MAX_STATES}); pass allow_large=True")
    layers = _layers_from_sizes(sizes)
    N = sum(sizes)
    n_joint = int(np.prod(actions))
    transition = np.zeros((N, *actions, N))
    losses = np.zeros((m, N, *actions))
    for h, layer in enumerate(layers[:-1]):
        nxt = layers[h + 1]
        for s in layer:
            rows = _floored_dirichlet(rng, n_joint, len(nxt)).reshape(*actions, len(nxt))
            transition[s][..., nxt] = rows
            losses[:, s] = rng.uniform(0.0, 1.0, size=(m, *actions))
    return MarkovGame(H, layers, actions, transition, losses)


def generate_independent_transition_game(m: int, H: int, states_per_layer, A, rng) -> IndependentGame:
    """Per-player kernels (floored Dirichlet rows) and joint uniform [0, 1] losses.

    ``states_per_layer`` is an int shared by every decision layer of every
    player, or a list with one spec per player (an int or H-1 sizes).
    """
    actions = (int(A),) * m if np.isscalar(A) else tuple(int(a) for a in A)
    if isinstance(states_per_layer, (int, np.integer)):
        per_player = [states_per_layer] * m
    else:
        per_player = list(states_per_layer)
        if len(per_player) != m:
            raise ValueError(f"{len(per_player)} layer specs for {m} players")
    sizes = [_layer_sizes(H, spec) for spec in per_player]
    layers = [_layers_from_sizes(sz) for sz in sizes]
    kernels = []
    for i in range(m):
        N = sum(sizes[i])
        K = np.zeros((N, actions[i], N))
        for h, layer in enumerate(layers[i][:-1]):
            nxt = layers[i][h + 1]
            for s in layer:
                K[s][:, nxt] = _floored_dirichlet(rng, actions[i], len(nxt))
        kernels.append(K)
    losses = []
    for i in range(m):
        per_h = []
        for h in range(H):
            shape = tuple(sizes[j][h] for j in range(m)) + actions
            per_h.append(rng.uniform(0.0, 1.0, size=shape))
        losses.append(per_h)
    return IndependentGame(H, layers, actions, kernels, losses)


# -- scripted non-stationary MDP --------------------------------------------

S0, S1, S2, L0, L1, TERMINAL = range(6)
ACTION_A, ACTION_B = 0, 1


@dataclass
class ScriptedNonStationaryMdp:
    """Single-agent layered MDP whose kernel switches after episode ``switch``.

    States 0..5 are s0, s1, s2, L0, L1 and the terminal state.  Episodes are
    1-based: episode ``t`` uses ``kernels[0]`` when ``t <= switch`` and
    ``kernels[1]`` otherwise.
    """

    T: int
    switch: int
    layers: list[list[int]]
    loss: np.ndarray       # (N, A)
    kernels: np.ndarray    # (2, N, A, N)

    n_players = 1
    action_counts = (2,)

    @property
    def horizon(self) -> int:
        return len(self.layers) - 1

    @property
    def n_states_total(self) -> int:
        return self.loss.shape[0]

    @property
    def S(self) -> int:
        return sum(len(layer) for layer in self.layers[:-1])

    @property
    def A(self) -> int:
        return 2

    def player_layers(self, i: int = 0):
        return self.layers

    def uniform_profile(self):
        return [np.full((self.n_states_total, 2), 0.5)]

    def phase(self, t: int) -> int:
        return 0 if t <= self.switch else 1

    def kernel_at(self, t: int) -> np.ndarray:
        return self.kernels[self.phase(t)]

    def kernel_schedule(self, start: int, stop: int) -> np.ndarray:
        """Kernels for 1-based episodes start..stop-1, stacked."""
        t = np.arange(start, stop)
        return self.kernels[(t > self.switch).astype(int)]

    def induced(self, profile, player: int = 0, t: int | None = None) -> InducedMdp:
        if t is None:
            raise ValueError("the scripted MDP needs the 1-based episode index t")
        return InducedMdp(0, self.layers, self.loss, self.kernel_at(t))

    def mdp_history(self, policies: Sequence[np.ndarray], player: int = 0) -> MdpHistory:
        pol = np.asarray(policies[0], dtype=float)
        T = pol.shape[0]

        def chunk(start, stop):
            k = self.kernel_schedule(start + 1, stop + 1)
            return np.broadcast_to(self.loss, (stop - start, *self.loss.shape)), k

        return MdpHistory(self.layers, pol, chunk)

    def kernel_variation(self) -> dict:
        """Total kernel change over t = 2..T under two conventions.

        ``flat_l1`` sums |P_t - P_{t-1}| over every (s, a, s') entry;
        ``inf_1`` takes the max over (s, a) of the per-row L1 distance.
        """
        if self.T <= self.switch:
            return {"flat_l1": 0.0, "inf_1": 0.0}
        diff = np.abs(self.kernels[1] - self.kernels[0])
        return {"flat_l1": float(diff.sum()), "inf_1": float(diff.sum(-1).max())}

    def optimal_policy(self) -> np.ndarray:
        pi = np.full((self.n_states_total, 2), 0.5)
        pi[S2] = [1.0, 0.0]
        return pi


def build_ftrl_counterexample(T: int) -> ScriptedNonStationaryMdp:
    """s0 -> s1 (t <= T/3) or s2 (t > T/3); at s2 the action reaching L1 (loss 1) flips."""
    if T % 3:
        T3 = T - T % 3
        log.info("T=%d is not divisible by 3; rounded down to %d", T, T3)
        T = T3
    if T < 3:
        raise ValueError("T must be at least 3")
    N = 6
    layers = [[S0], [S1, S2], [L0, L1], [TERMINAL]]
    loss = np.zeros((N, 2))
    loss[L1] = 1.0
    kernels = np.zeros((2, N, 2, N))
    for k in range(2):
        kernels[k, S1, :, L0] = 1.0
        kernels[k, L0, :, TERMINAL] = 1.0
        kernels[k, L1, :, TERMINAL] = 1.0
    kernels[0, S0, :, S1] = 1.0
    kernels[0, S2, ACTION_A, L1] = 1.0
    kernels[0, S2, ACTION_B, L0] = 1.0
    kernels[1, S0, :, S2] = 1.0
    kernels[1, S2, ACTION_B, L1] = 1.0
    kernels[1, S2, ACTION_A, L0] = 1.0
    return ScriptedNonStationaryMdp(T, T // 3, layers, loss, kernels)


def as_markov_game(env: ScriptedNonStationaryMdp, t: int) -> MarkovGame:
    """The single-player game in force at episode ``t``."""
    return MarkovGame(env.horizon, env.layers, (2,), env.kernel_at(t), env.loss[None])


__all__ = [
    "generate_random_game", "generate_independent_transition_game", "build_ftrl_counterexample",
    "ScriptedNonStationaryMdp", "as_markov_game", "array_history",
]
