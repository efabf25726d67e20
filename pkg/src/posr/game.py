"""Layered finite-horizon Markov games and exact dynamic-programming evaluation.

States carry global integer ids.  Layer ``h`` (0-based here, ``h = 0..H``) is
``game.layers[h]``; layer 0 holds the single initial state and layer ``H``
the single terminal state.  Every per-state array is indexed by the global id,
so the terminal state owns a row too: its losses and kernel rows are zero and
policies keep it uniform.

Arrays used throughout:

* transition: ``(N, A_1, ..., A_m, N)``
* losses:     ``(m, N, A_1, ..., A_m)``
* policy of player i: ``(N, A_i)``
* induced MDP: loss ``(N, A)``, kernel ``(N, A, N)``

Every evaluation routine accepts extra leading batch axes on the loss, kernel
and policy arrays, which lets the metrics module evaluate thousands of
episodes or swap candidates in one pass.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ROW_TOL = 1e-12

Policy = np.ndarray
PolicyProfile = list  # list[np.ndarray], one (N, A_i) array per player


@dataclass
class MarkovGame:
    horizon: int
    layers: list[list[int]]
    action_counts: tuple[int, ...]
    transition: np.ndarray
    losses: np.ndarray

    def __post_init__(self):
        self.action_counts = tuple(int(a) for a in self.action_counts)
        self.transition = np.asarray(self.transition, dtype=float)
        self.losses = np.asarray(self.losses, dtype=float)

    @property
    def n_players(self) -> int:
        return len(self.action_counts)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def initial(self) -> int:
        return self.layers[0][0]

    @property
    def terminal(self) -> int:
        return self.layers[-1][0]

    @property
    def nonterminal(self) -> np.ndarray:
        return np.array([s for layer in self.layers[:-1] for s in layer], dtype=int)

    @property
    def S(self) -> int:
        """Number of non-terminal states (the S of the step-size formulas)."""
        return sum(len(layer) for layer in self.layers[:-1])

    @property
    def A(self) -> int:
        return max(self.action_counts)

    def layer_of(self) -> np.ndarray:
        out = np.full(self.n_states, -1, dtype=int)
        for h, layer in enumerate(self.layers):
            out[layer] = h
        return out

    def uniform_profile(self) -> PolicyProfile:
        return [np.full((self.n_states, a), 1.0 / a) for a in self.action_counts]

    # environment protocol shared with the scripted and independent-transition models
    def player_layers(self, i: int) -> list[list[int]]:
        return self.layers

    def induced(self, profile, player: int, t: int | None = None) -> "InducedMdp":
        return induce_mdp(self, profile, player)

    def mdp_history(self, policies, player: int) -> "MdpHistory":
        return game_history(self, policies, player)


@dataclass
class InducedMdp:
    """Single-agent MDP seen by ``player`` once opponents are marginalized out."""

    player: int
    layers: list[list[int]]
    loss: np.ndarray
    kernel: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.layers) - 1

    @property
    def n_actions(self) -> int:
        return self.loss.shape[-1]


@dataclass
class ValueTables:
    V: np.ndarray
    Q: np.ndarray


@dataclass
class ValidationReport:
    issues: list[str] = field(default_factory=list)

    def __bool__(self):
        return not self.issues

    @property
    def ok(self) -> bool:
        return not self.issues


def validate_game(game: MarkovGame) -> ValidationReport:
    """Collect every violated structural invariant of ``game``."""
    issues = []
    H = game.horizon
    N = game.n_states
    m = game.n_players
    if len(game.layers) != H + 1:
        issues.append(f"expected {H + 1} layers, got {len(game.layers)}")
    if game.layers and len(game.layers[0]) != 1:
        issues.append(f"layer 1 must be a singleton, got {game.layers[0]}")
    if game.layers and len(game.layers[-1]) != 1:
        issues.append(f"terminal layer must be a singleton, got {game.layers[-1]}")
    seen = [s for layer in game.layers for s in layer]
    if sorted(seen) != list(range(N)):
        issues.append(f"layers must partition state ids 0..{N - 1}")
    if any(a < 1 for a in game.action_counts):
        issues.append(f"action counts must be positive: {game.action_counts}")
    expect_t = (N, *game.action_counts, N)
    expect_l = (m, N, *game.action_counts)
    if game.transition.shape != expect_t:
        issues.append(f"transition shape {game.transition.shape} != {expect_t}")
    if game.losses.shape != expect_l:
        issues.append(f"losses shape {game.losses.shape} != {expect_l}")
    if issues:
        return ValidationReport(issues)

    layer_of = game.layer_of()
    joint = list(itertools.product(*(range(a) for a in game.action_counts)))
    for h, layer in enumerate(game.layers[:-1]):
        nxt = set(game.layers[h + 1])
        for s in layer:
            for ja in joint:
                row = game.transition[(s, *ja)]
                if np.any(row < 0):
                    issues.append(f"negative transition entry at state {s}, joint action {list(ja)}")
                total = row.sum()
                if abs(total - 1.0) > ROW_TOL:
                    issues.append(
                        f"transition row at state {s}, joint action {list(ja)} sums to {total!r}")
                off = [int(s2) for s2 in np.flatnonzero(row) if int(s2) not in nxt]
                if off:
                    issues.append(
                        f"transition from state {s} (layer {h + 1}), joint action {list(ja)} "
                        f"reaches non-adjacent states {off}")
                for i in range(m):
                    v = game.losses[(i, s, *ja)]
                    if not (0.0 <= v <= 1.0):
                        issues.append(
                            f"loss of player {i} at state {s}, joint action {list(ja)} is {v!r}, "
                            "outside [0, 1]")
    t = game.terminal
    if np.any(game.transition[t] != 0) or np.any(game.losses[:, t] != 0):
        issues.append(f"terminal state {t} must carry zero losses and no transitions")
    if np.any(layer_of < 0):
        issues.append("some states belong to no layer")
    return ValidationReport(issues)


def _check_profile(game: MarkovGame, profile: Sequence[np.ndarray]):
    if len(profile) != game.n_players:
        raise ValueError(f"profile has {len(profile)} players, game has {game.n_players}")
    for i, pi in enumerate(profile):
        if pi.shape[-2:] != (game.n_states, game.action_counts[i]):
            raise ValueError(
                f"policy of player {i} has shape {pi.shape}, expected "
                f"(..., {game.n_states}, {game.action_counts[i]})")


def _marginalize(tensor: np.ndarray, profile: Sequence[np.ndarray], keep: int, offset: int):
    """Contract every joint-action axis except ``keep`` against the opponents' policies.

    ``tensor`` has the state axis at position ``offset - 1`` (after any batch
    axes) followed by ``m`` joint-action axes and possibly trailing axes.
    Policies may carry batch axes matching those of ``tensor``.
    """
    m = len(profile)
    out = tensor
    # contract from the last player down so axis positions stay valid
    for j in reversed(range(m)):
        if j == keep:
            continue
        pi = profile[j]  # (..., N, A_j)
        ax = offset + j
        # broadcast pi to the tensor layout: (..., N, 1.., A_j, 1.., trailing)
        n_after = out.ndim - ax - 1
        shape = list(pi.shape[:-1]) + [1] * (ax - offset) + [pi.shape[-1]] + [1] * n_after
        out = (out * pi.reshape(shape)).sum(axis=ax)
    return out


def induce_mdp(game: MarkovGame, profile: Sequence[np.ndarray], player: int) -> InducedMdp:
    """Exact induced loss and kernel for ``player`` given the opponents in ``profile``."""
    _check_profile(game, profile)
    batch = profile[0].ndim - 2
    if batch:
        raise ValueError("induce_mdp takes a single profile; use induce_mdp_batch for histories")
    loss = _marginalize(game.losses[player], profile, player, offset=1)
    kernel = _marginalize(game.transition, profile, player, offset=1)
    return InducedMdp(player, game.layers, loss, kernel)


def induce_mdp_batch(game: MarkovGame, profiles: Sequence[np.ndarray], player: int):
    """Induced (loss, kernel) for a stacked history: policies of shape ``(T, N, A_j)``.

    Returns arrays ``(T, N, A_i)`` and ``(T, N, A_i, N)``.
    """
    m = game.n_players
    T = profiles[0].shape[0]
    loss = np.broadcast_to(game.losses[player], (T, *game.losses[player].shape))
    kernel = np.broadcast_to(game.transition, (T, *game.transition.shape))
    loss = _marginalize(loss, profiles, player, offset=2)
    kernel = _marginalize(kernel, profiles, player, offset=2)
    if m == 1:
        loss = np.array(loss)
        kernel = np.array(kernel)
    return loss, kernel


def backward_induction(layers, loss, kernel, policy):
    """V and Q for ``policy`` by backward induction.  Leading batch axes broadcast.

    loss ``(..., N, A)``, kernel ``(..., N, A, N)``, policy ``(..., N, A)``.
    """
    batch = np.broadcast_shapes(loss.shape[:-2], kernel.shape[:-3], policy.shape[:-2])
    N, A = loss.shape[-2:]
    V = np.zeros(batch + (N,))
    Q = np.zeros(batch + (N, A))
    for layer in reversed(layers[:-1]):
        idx = np.asarray(layer)
        q = loss[..., idx, :] + (kernel[..., idx, :, :] @ V[..., None, :, None])[..., 0]
        Q[..., idx, :] = q
        V[..., idx] = (policy[..., idx, :] * q).sum(-1)
    return V, Q


def evaluate(mdp: InducedMdp, policy: np.ndarray) -> ValueTables:
    V, Q = backward_induction(mdp.layers, mdp.loss, mdp.kernel, policy)
    return ValueTables(V, Q)


def forward_occupancy(layers, kernel, policy):
    """State-occupancy q(s) of ``policy``; batch axes broadcast like backward_induction."""
    batch = np.broadcast_shapes(kernel.shape[:-3], policy.shape[:-2])
    N = kernel.shape[-1]
    q = np.zeros(batch + (N,))
    q[..., layers[0][0]] = 1.0
    for layer in layers[:-1]:
        idx = np.asarray(layer)
        # mass leaving each state of this layer, split by action then by next state
        flow = q[..., idx, None] * policy[..., idx, :]  # (..., |layer|, A)
        q = q + np.einsum("...sa,...san->...n", flow, kernel[..., idx, :, :])
    return q


def occupancy(mdp: InducedMdp, policy: np.ndarray) -> np.ndarray:
    return forward_occupancy(mdp.layers, mdp.kernel, policy)


def apply_swap(policy: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Push the mass of action ``a`` at state ``s`` onto ``phi[s, a]``.

    ``policy`` may carry leading batch axes; ``phi`` is ``(N, A)`` of ints.
    """
    phi = np.asarray(phi, dtype=int)
    A = policy.shape[-1]
    onehot = np.eye(A)[phi]  # (N, A, A): onehot[s, a, b] = [phi(s,a) = b]
    return np.einsum("...sa,sab->...sb", policy, onehot)


def joint_value(game: MarkovGame, profile: Sequence[np.ndarray], player: int) -> float:
    """V^{i, profile}(s_1) by backward induction over the full joint-action space."""
    _check_profile(game, profile)
    V = np.zeros(game.n_states)
    for layer in reversed(game.layers[:-1]):
        for s in layer:
            weights = profile[0][s]
            for pi in profile[1:]:
                weights = np.multiply.outer(weights, pi[s])
            future = game.transition[s] @ V
            V[s] = float((weights * (game.losses[player, s] + future)).sum())
    return float(V[game.initial])


def policy_distance(pi: np.ndarray, other: np.ndarray, states=None) -> np.ndarray:
    """The (inf, 1) policy distance: max over states of the per-state L1 distance."""
    d = np.abs(pi - other).sum(-1)
    if states is not None:
        d = d[..., states]
    return d.max(-1)


def path_lengths(profiles: Sequence[Sequence[np.ndarray]]):
    """First- and second-order path lengths per player along a profile sequence.

    Returns two arrays of length m: sum over t of ``||pi_{t+1} - pi_t||_{inf,1}``
    and of its square.
    """
    if len(profiles) < 2:
        raise ValueError("path lengths need at least two profiles")
    m = len(profiles[0])
    first = np.zeros(m)
    second = np.zeros(m)
    for i in range(m):
        hist = np.stack([p[i] for p in profiles])
        d = policy_distance(hist[1:], hist[:-1])
        first[i] = d.sum()
        second[i] = (d ** 2).sum()
    return first, second


def history_path_lengths(history: np.ndarray, states=None):
    """Per-step (inf,1) distances for a stacked ``(T+1, N, A)`` policy history."""
    return policy_distance(history[1:], history[:-1], states)


@dataclass
class MdpHistory:
    """Sequence of induced MDPs faced by one player, plus the policies it played.

    ``chunk(start, stop)`` returns the induced loss ``(k, N, A)`` and kernel
    ``(k, N, A, N)`` (or ``(1, N, A, N)`` when the kernel is fixed) for
    episodes ``start..stop-1`` (0-based).  Metrics walk the history in
    chunks so long runs never materialize every kernel at once.
    """

    layers: list[list[int]]
    policies: np.ndarray  # (T, N, A)
    chunk: object

    @property
    def T(self) -> int:
        return self.policies.shape[0]

    @property
    def states(self) -> np.ndarray:
        return np.array([s for layer in self.layers[:-1] for s in layer], dtype=int)

    @property
    def initial(self) -> int:
        return self.layers[0][0]


def game_history(game: MarkovGame, policies: Sequence[np.ndarray], player: int) -> MdpHistory:
    """History of ``player`` when the players' stacked ``(T, N, A_j)`` policies are ``policies``."""
    policies = [np.asarray(p, dtype=float) for p in policies]

    def chunk(start, stop):
        return induce_mdp_batch(game, [p[start:stop] for p in policies], player)

    return MdpHistory(game.layers, policies[player], chunk)


def array_history(layers, policies, loss, kernel) -> MdpHistory:
    """History from explicit per-episode arrays; ``kernel`` may have a leading axis of 1."""
    loss = np.asarray(loss, dtype=float)
    kernel = np.asarray(kernel, dtype=float)

    def chunk(start, stop):
        k = kernel if kernel.shape[0] == 1 else kernel[start:stop]
        return loss[start:stop], k

    return MdpHistory(layers, np.asarray(policies, dtype=float), chunk)


def stack_profiles(profiles: Sequence[Sequence[np.ndarray]]) -> list[np.ndarray]:
    """List of per-episode profiles -> one ``(T, N, A_j)`` array per player."""
    m = len(profiles[0])
    return [np.stack([np.asarray(p[j], dtype=float) for p in profiles]) for j in range(m)]
