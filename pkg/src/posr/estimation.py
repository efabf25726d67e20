"""Episode sampling, the blocked Q estimator and exact minimum reachability."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game import MarkovGame


@dataclass
class Trajectory:
    """One episode: ``states[h]`` and ``actions[h]`` (joint) for each decision step,
    ``losses[h, i]`` the loss of player i at step h, plus the terminal state."""

    states: np.ndarray     # (H,)
    actions: np.ndarray    # (H, m)
    losses: np.ndarray     # (H, m)
    terminal: int

    @property
    def returns(self) -> np.ndarray:
        return self.losses.sum(0)


@dataclass
class TrajectoryBatch:
    """``n`` episodes stored column-wise: states ``(n, H)``, actions ``(n, H, m)``, losses ``(n, H, m)``."""

    states: np.ndarray
    actions: np.ndarray
    losses: np.ndarray
    terminal: int

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, k) -> Trajectory:
        return Trajectory(self.states[k], self.actions[k], self.losses[k], self.terminal)

    @classmethod
    def from_trajectories(cls, trajs: Sequence[Trajectory]) -> "TrajectoryBatch":
        return cls(np.stack([t.states for t in trajs]), np.stack([t.actions for t in trajs]),
                   np.stack([t.losses for t in trajs]), trajs[0].terminal)


def _draw(rng, probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row of ``probs`` (n, k) by inverse CDF."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    return np.minimum((u[:, None] >= cdf).sum(-1), probs.shape[-1] - 1)


def sample_episodes(game: MarkovGame, profile: Sequence[np.ndarray], n: int, rng) -> TrajectoryBatch:
    """Simulate ``n`` independent episodes of ``profile`` (vectorized over episodes)."""
    H = game.horizon
    m = game.n_players
    states = np.zeros((n, H), dtype=int)
    actions = np.zeros((n, H, m), dtype=int)
    losses = np.zeros((n, H, m))
    s = np.full(n, game.initial, dtype=int)
    for h in range(H):
        states[:, h] = s
        for i in range(m):
            actions[:, h, i] = _draw(rng, profile[i][s])
        ja = tuple(actions[:, h, i] for i in range(m))
        losses[:, h, :] = game.losses[(slice(None), s, *ja)].T
        s = _draw(rng, game.transition[(s, *ja)])
    return TrajectoryBatch(states, actions, losses, game.terminal)


def sample_episode(game: MarkovGame, profile: Sequence[np.ndarray], rng) -> Trajectory:
    return sample_episodes(game, profile, 1, rng)[0]


@dataclass
class QEstimate:
    q_hat: np.ndarray        # (N, A)
    counts: np.ndarray       # (N, A) visits
    unvisited: np.ndarray    # (N, A) bool, non-terminal cells never visited

    @property
    def flagged(self) -> bool:
        return bool(self.unvisited.any())


def estimate_q(block, player: int, game: MarkovGame, normalization: str = "visits") -> QEstimate:
    """Tail-loss average per visited (state, own action).

    ``normalization="visits"`` divides by the visit count; ``"block"``
    divides by the number of episodes, as in the literal estimator display.
    """
    if isinstance(block, (list, tuple)):
        block = TrajectoryBatch.from_trajectories(block)
    n, H = block.states.shape
    N = game.n_states
    A = game.action_counts[player]
    own = block.losses[:, :, player]
    tails = np.cumsum(own[:, ::-1], axis=1)[:, ::-1]  # tail[h] = sum_{h' >= h} loss
    flat = block.states * A + block.actions[:, :, player]
    counts = np.bincount(flat.ravel(), minlength=N * A).reshape(N, A).astype(float)
    sums = np.bincount(flat.ravel(), weights=tails.ravel(), minlength=N * A).reshape(N, A)
    if normalization == "visits":
        q_hat = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    elif normalization == "block":
        q_hat = sums / max(n, 1)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    unvisited = counts == 0
    unvisited[game.terminal] = False
    return QEstimate(q_hat, counts, unvisited)


def min_reachability(game: MarkovGame):
    """(beta, argmin state): the smallest probability of reaching any state
    under any product Markov policy, by forward minimization per target."""
    best = (np.inf, -1)
    layer_of = game.layer_of()
    m = game.n_players
    for z in range(game.n_states):
        hz = layer_of[z]
        # W[s] = min over policies of Pr(reach z | start at s), for layers below hz
        W = np.zeros(game.n_states)
        W[z] = 1.0
        for h in range(hz - 1, -1, -1):
            for s in game.layers[h]:
                # min over joint actions (multilinear objective: a vertex attains it)
                vals = game.transition[s] @ W  # (A_1..A_m)
                W[s] = vals.min()
        p = W[game.initial]
        if p < best[0]:
            best = (float(p), z)
    return best


def min_reachability_bruteforce(game: MarkovGame):
    """Enumerate every deterministic product policy; for tiny games only."""
    states = game.nonterminal
    per_player = [list(itertools.product(range(a), repeat=len(states))) for a in game.action_counts]
    best = (np.inf, -1)
    for combo in itertools.product(*per_player):
        profile = []
        for i, choice in enumerate(combo):
            pi = np.full((game.n_states, game.action_counts[i]), 1.0 / game.action_counts[i])
            pi[states] = np.eye(game.action_counts[i])[list(choice)]
            profile.append(pi)
        q = _occupancy_joint(game, profile)
        z = int(np.argmin(q))
        if q[z] < best[0]:
            best = (float(q[z]), z)
    return best


def _occupancy_joint(game: MarkovGame, profile) -> np.ndarray:
    q = np.zeros(game.n_states)
    q[game.initial] = 1.0
    for layer in game.layers[:-1]:
        for s in layer:
            w = profile[0][s]
            for pi in profile[1:]:
                w = np.multiply.outer(w, pi[s])
            q += q[s] * np.tensordot(w, game.transition[s], axes=w.ndim)
    return q


@dataclass
class BlockConfig:
    block: int
    epsilon: float
    delta: float
    beta: float
    normalization: str = "visits"

    def __post_init__(self):
        if self.block < 1:
            raise ValueError(f"block length must be >= 1, got {self.block}")


def block_seed_sequence(root_seed: int, block: int) -> np.random.SeedSequence:
    """Stream for block ``block`` derived from the root seed by fixed-key spawning."""
    return np.random.SeedSequence(entropy=root_seed, spawn_key=(block,))


__all__ = [
    "Trajectory", "TrajectoryBatch", "QEstimate", "BlockConfig", "sample_episode", "sample_episodes",
    "estimate_q", "min_reachability", "min_reachability_bruteforce", "block_seed_sequence",
]
