"""Games where each player moves on its own layered state space.

Player ``i`` has its own layers ``layers[i]`` (global ids local to that
player), a fixed kernel ``kernels[i]`` of shape ``(N_i, A_i, N_i)`` driven by
its own action only, and a loss at step ``h`` that depends on every player's
step-``h`` state and action.  ``losses[i][h]`` has shape
``(L^1_h, ..., L^m_h, A_1, ..., A_m)`` where ``L^j_h`` is the size of player
``j``'s layer ``h`` and state axes are ordered as in ``layers[j][h]``.

Since the others only enter through the loss, player ``i``'s induced kernel
is its own kernel in every episode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import InducedMdp, MdpHistory, forward_occupancy


@dataclass
class IndependentGame:
    horizon: int
    layers: list[list[list[int]]]
    action_counts: tuple[int, ...]
    kernels: list[np.ndarray]
    losses: list[list[np.ndarray]]

    def __post_init__(self):
        self.action_counts = tuple(int(a) for a in self.action_counts)
        self.kernels = [np.asarray(k, dtype=float) for k in self.kernels]
        self.losses = [[np.asarray(x, dtype=float) for x in per] for per in self.losses]

    @property
    def n_players(self) -> int:
        return len(self.action_counts)

    def n_states(self, i: int) -> int:
        return self.kernels[i].shape[0]

    def S_of(self, i: int) -> int:
        return sum(len(layer) for layer in self.layers[i][:-1])

    @property
    def S(self) -> int:
        return max(self.S_of(i) for i in range(self.n_players))

    @property
    def A(self) -> int:
        return max(self.action_counts)

    def player_layers(self, i: int) -> list[list[int]]:
        return self.layers[i]

    def uniform_profile(self):
        return [np.full((self.n_states(i), a), 1.0 / a) for i, a in enumerate(self.action_counts)]

    def validate(self) -> list[str]:
        issues = []
        for i in range(self.n_players):
            lay = self.layers[i]
            if len(lay) != self.horizon + 1 or len(lay[0]) != 1 or len(lay[-1]) != 1:
                issues.append(f"player {i}: bad layer structure {lay}")
                continue
            K = self.kernels[i]
            for h, layer in enumerate(lay[:-1]):
                nxt = set(lay[h + 1])
                for s in layer:
                    for a in range(self.action_counts[i]):
                        row = K[s, a]
                        if np.any(row < 0) or abs(row.sum() - 1) > 1e-12:
                            issues.append(f"player {i}: kernel row ({s}, {a}) is not a distribution")
                        if any(int(s2) not in nxt for s2 in np.flatnonzero(row)):
                            issues.append(f"player {i}: kernel row ({s}, {a}) skips a layer")
            for h in range(self.horizon):
                x = self.losses[i][h]
                shape = tuple(len(self.layers[j][h]) for j in range(self.n_players)) + self.action_counts
                if x.shape != shape:
                    issues.append(f"player {i}: step {h} loss shape {x.shape} != {shape}")
                elif x.min() < 0 or x.max() > 1:
                    issues.append(f"player {i}: step {h} losses outside [0, 1]")
        return issues

    def induced_batch(self, policies: Sequence[np.ndarray], player: int):
        """Induced loss ``(T, N_i, A_i)`` and kernel ``(1, N_i, A_i, N_i)`` for stacked policies."""
        m = self.n_players
        policies = [np.asarray(p, dtype=float) for p in policies]
        T = policies[player].shape[0]
        occ = [forward_occupancy(self.layers[j], self.kernels[j][None], policies[j]) for j in range(m)]
        N = self.n_states(player)
        loss = np.zeros((T, N, self.action_counts[player]))
        t_ax = 2 * m
        for h in range(self.horizon):
            operands = [self.losses[player][h], list(range(2 * m))]
            for j in range(m):
                if j == player:
                    continue
                idx = self.layers[j][h]
                w = occ[j][:, idx, None] * policies[j][:, idx, :]  # (T, L_j, A_j)
                operands += [w, [t_ax, j, m + j]]
            idx = self.layers[player][h]
            if m == 1:
                loss[:, idx, :] = self.losses[player][h]
            else:
                loss[:, idx, :] = np.einsum(*operands, [t_ax, player, m + player])
        return loss, self.kernels[player][None]

    def induced(self, profile: Sequence[np.ndarray], player: int, t: int | None = None) -> InducedMdp:
        loss, kernel = self.induced_batch([np.asarray(p)[None] for p in profile], player)
        return InducedMdp(player, self.layers[player], loss[0], kernel[0])

    def mdp_history(self, policies: Sequence[np.ndarray], player: int) -> MdpHistory:
        policies = [np.asarray(p, dtype=float) for p in policies]

        def chunk(start, stop):
            return self.induced_batch([p[start:stop] for p in policies], player)

        return MdpHistory(self.layers[player], policies[player], chunk)
