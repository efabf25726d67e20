"""Exact regret, CE gap and bound residuals, evaluated by brute force.

Swap functions are ``(N, A)`` integer tables with the identity on the
terminal row.  Candidates are enumerated in lexicographic order of the
table restricted to non-terminal states (states ascending, then actions),
so index 0 is the all-zeros table and ``np.argmax`` over a block of
candidates keeps the lexicographically first maximizer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game import MdpHistory, apply_swap, backward_induction, forward_occupancy, joint_value
from .game import policy_distance

log = logging.getLogger(__name__)

ENUMERATION_CAP = 2 ** 20
# elements per vectorized evaluation step; bounds peak memory of a chunk
EVAL_BUDGET = 4_000_000


class EnumerationCapError(ValueError):
    pass


def log_checkpoints(T: int, count: int = 32) -> np.ndarray:
    """``min(count, T)`` strictly increasing, roughly log-spaced episode counts ending at ``T``."""
    if T <= 0:
        return np.zeros(0, dtype=int)
    k = min(count, T)
    c = np.round(np.geomspace(1, T, k)).astype(int)
    c[-1] = T
    for j in range(1, k):
        c[j] = max(c[j], c[j - 1] + 1)
    for j in range(k - 2, -1, -1):
        c[j] = min(c[j], c[j + 1] - 1)
    return c


def _as_stacked(profiles) -> list[np.ndarray]:
    """Accept a list of per-episode profiles or per-player stacked arrays."""
    first = profiles[0]
    if isinstance(first, (list, tuple)):
        m = len(first)
        return [np.stack([np.asarray(p[j], dtype=float) for p in profiles]) for j in range(m)]
    return [np.asarray(p, dtype=float) for p in profiles]


# -- candidate families -------------------------------------------------------

def swap_count(S: int, A: int) -> int:
    return A ** (S * A)


def swap_tables(index: np.ndarray, states: np.ndarray, N: int, A: int) -> np.ndarray:
    """Lexicographic swap tables for integer ``index`` values, shape ``(C, N, A)``."""
    states = np.sort(np.asarray(states))
    n = len(states) * A
    index = np.asarray(index, dtype=np.int64)
    powers = A ** np.arange(n - 1, -1, -1, dtype=np.int64)
    digits = (index[:, None] // powers) % A
    phi = np.tile(np.arange(A), (len(index), N, 1))
    phi[:, states, :] = digits.reshape(len(index), len(states), A)
    return phi


def deterministic_policies(index: np.ndarray, states: np.ndarray, N: int, A: int) -> np.ndarray:
    """Lexicographic deterministic policies as one-hot ``(C, N, A)``; terminal row uniform."""
    states = np.sort(np.asarray(states))
    n = len(states)
    index = np.asarray(index, dtype=np.int64)
    powers = A ** np.arange(n - 1, -1, -1, dtype=np.int64)
    digits = (index[:, None] // powers) % A
    out = np.full((len(index), N, A), 1.0 / A)
    out[:, states, :] = np.eye(A)[digits]
    return out


def _swap_transform(policies: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """``(k, N, A)`` policies and ``(C, N, A)`` tables -> ``(k, N, A, C)`` swapped policies.

    The candidate axis is last, the layout :func:`_candidate_values` consumes.
    """
    A = policies.shape[-1]
    onehot = np.moveaxis(np.eye(A)[phis], 0, -1)  # (N, A, A, C): [phi_c(s, a) = b]
    out = np.zeros((*policies.shape, phis.shape[0]))
    for a in range(A):
        out += policies[:, :, a, None, None] * onehot[None, :, a]
    return out


# -- core evaluation ------------------------------------------------------------

class _Chunks:
    """Caches the induced MDP chunks of a history when they fit in memory."""

    def __init__(self, history: MdpHistory, size: int):
        self.history = history
        self.size = max(1, size)
        T = history.T
        self.bounds = [(a, min(a + self.size, T)) for a in range(0, T, self.size)]
        N = history.policies.shape[1]
        A = history.policies.shape[2]
        self.cache = [] if T * N * A * N <= 4 * EVAL_BUDGET else None
        if self.cache is not None:
            self.cache = [history.chunk(a, b) for a, b in self.bounds]

    def __iter__(self):
        for j, (a, b) in enumerate(self.bounds):
            if self.cache is not None:
                loss, kernel = self.cache[j]
            else:
                loss, kernel = self.history.chunk(a, b)
            yield a, b, loss, kernel


def base_values(history: MdpHistory, chunks: _Chunks | None = None) -> np.ndarray:
    """V_t(s_1) of the played policies, shape ``(T,)``."""
    chunks = chunks or _Chunks(history, 4096)
    s1 = history.initial
    out = np.zeros(history.T)
    for a, b, loss, kernel in chunks:
        V, _ = backward_induction(history.layers, loss, kernel, history.policies[a:b])
        out[a:b] = V[..., s1]
    return out


def _candidate_values(layers, loss, kernel, dev) -> np.ndarray:
    """V(s_1) of many candidate policies in the same MDP sequence, shape ``(C, k)``.

    loss ``(k, N, A)``, kernel ``(k or 1, N, A, N)``, dev ``(k or 1, N, A, C)``.
    Candidates ride along the column axis of one batched matmul per layer.
    """
    k, N, A = loss.shape
    C = dev.shape[-1]
    pol = dev
    V = np.zeros((k, N, C))
    for layer in reversed(layers[:-1]):
        idx = np.asarray(layer)
        L = len(idx)
        Kl = kernel[:, idx].reshape(kernel.shape[0], L * A, N)
        q = loss[:, idx, :, None] + (Kl @ V).reshape(k, L, A, C)
        V[:, idx, :] = (pol[:, idx] * q).sum(2)
    return V[:, layers[0][0], :].T


def _gain_curves(history: MdpHistory, n_candidates: int, make, checkpoints, *, v0=None,
                 return_all=False):
    """Cumulative gains sum_{t<=c} (V_t(pi_t) - V_t(dev_t)) for every candidate and checkpoint.

    ``make(idx, policies)`` returns deviation policies ``(k, N, A, C)`` or
    ``(1, N, A, C)`` when the deviation does not depend on t.  Returns the
    max over candidates at each checkpoint and the first maximizing
    candidate index, or with ``return_all`` the full ``(n, K)`` gain matrix.
    """
    T = history.T
    N, A = history.policies.shape[1:]
    checkpoints = np.asarray(checkpoints, dtype=int)
    K = len(checkpoints)
    best = np.full(K, -np.inf)
    arg = np.zeros(K, dtype=np.int64)
    every = np.zeros((n_candidates, K)) if return_all else None
    if T == 0 or K == 0:
        return every if return_all else (best, arg)
    cand_chunk = max(1, min(n_candidates, EVAL_BUDGET // max(1, 64 * N * A)))
    time_chunk = max(1, EVAL_BUDGET // (cand_chunk * N * A * N))
    chunks = _Chunks(history, time_chunk)
    if v0 is None:
        v0 = base_values(history, chunks)
    cum_v0 = np.concatenate([[0.0], np.cumsum(v0)])
    s1 = history.initial
    for c0 in range(0, n_candidates, cand_chunk):
        idx = np.arange(c0, min(c0 + cand_chunk, n_candidates))
        running = np.zeros(len(idx))
        gains = np.zeros((len(idx), K))
        for a, b, loss, kernel in chunks:
            dev = make(idx, history.policies[a:b])
            v = _candidate_values(history.layers, loss, kernel, dev)  # (C, k)
            cum = running[:, None] + np.cumsum(v, axis=1)
            sel = (checkpoints > a) & (checkpoints <= b)
            if np.any(sel):
                gains[:, sel] = cum[:, checkpoints[sel] - a - 1]
            running = cum[:, -1]
        # gains hold cumulative deviation values; convert to regret
        gains = cum_v0[checkpoints][None, :] - gains
        if return_all:
            every[idx] = gains
            continue
        local = np.argmax(gains, axis=0)
        vals = gains[local, np.arange(K)]
        better = vals > best
        best[better] = vals[better]
        arg[better] = idx[local[better]]
    return every if return_all else (best, arg)


@dataclass
class RegretCurve:
    checkpoints: np.ndarray
    values: np.ndarray
    argmax: np.ndarray       # table (swap) or policy (external) maximizing at the final checkpoint
    exact: bool = True
    n_candidates: int = 0


def swap_regret_curve(history: MdpHistory, checkpoints=None, cap: int = ENUMERATION_CAP,
                      allow_lower_bound: bool = False) -> RegretCurve:
    T = history.T
    checkpoints = np.array([T] if checkpoints is None else checkpoints, dtype=int)
    N, A = history.policies.shape[1:]
    states = history.states
    S = len(states)
    count = swap_count(S, A)
    if count > cap:
        if not allow_lower_bound:
            raise EnumerationCapError(
                f"{count} swap functions exceed the enumeration cap {cap}; "
                "use swap_regret_lower_bound (or allow_lower_bound=True) for a labeled lower bound")
        return swap_regret_lower_bound(history, checkpoints, cap)
    if T == 0:
        return RegretCurve(checkpoints, np.zeros(len(checkpoints)), swap_tables(np.zeros(1), states, N, A)[0],
                           True, count)

    def make(idx, pol):
        return _swap_transform(pol, swap_tables(idx, states, N, A))

    best, arg = _gain_curves(history, count, make, checkpoints)
    phi = swap_tables(arg[-1:], states, N, A)[0]
    return RegretCurve(checkpoints, best, phi, True, count)


def swap_regret_lower_bound(history: MdpHistory, checkpoints=None, cap: int = ENUMERATION_CAP,
                            max_rounds: int = 50) -> RegretCurve:
    """Max over a restricted swap family: identity, constant-row swaps (when enumerable)
    and a single-cell hill climb from the best of those.  A lower bound on the swap regret."""
    T = history.T
    checkpoints = np.array([T] if checkpoints is None else checkpoints, dtype=int)
    N, A = history.policies.shape[1:]
    states = np.sort(history.states)
    identity = np.tile(np.arange(A), (N, 1))
    family = [identity]
    if A ** len(states) <= cap:
        det = np.arange(A ** len(states))
        powers = A ** np.arange(len(states) - 1, -1, -1, dtype=np.int64)
        digits = (det[:, None] // powers) % A
        const = np.tile(identity, (len(det), 1, 1))
        const[:, states, :] = digits[:, :, None]
        family.extend(const)
    v0 = base_values(history)

    def total(tables):
        tables = np.asarray(tables)
        return _gain_curves(history, len(tables), lambda idx, pol: _swap_transform(pol, tables[idx]),
                            [T], v0=v0, return_all=True)[:, 0]

    family = np.array(family)
    scores = total(family)
    current = family[int(np.argmax(scores))].copy()
    cur_score = float(scores.max())
    for _ in range(max_rounds):
        neigh = []
        for s in states:
            for a in range(A):
                for b in range(A):
                    if b != current[s, a]:
                        t = current.copy()
                        t[s, a] = b
                        neigh.append(t)
        if not neigh:
            break
        sc = total(neigh)
        k = int(np.argmax(sc))
        if sc[k] <= cur_score + 1e-12:
            break
        current, cur_score = neigh[k], float(sc[k])
        family = np.concatenate([family, current[None]])
    # evaluate the whole visited family at every checkpoint
    best, arg = _gain_curves(history, len(family), lambda idx, pol: _swap_transform(pol, family[idx]),
                             checkpoints, v0=v0)
    return RegretCurve(checkpoints, best, family[arg[-1]], False, len(family))


def external_regret_curve(history: MdpHistory, checkpoints=None, cap: int = ENUMERATION_CAP) -> RegretCurve:
    T = history.T
    checkpoints = np.array([T] if checkpoints is None else checkpoints, dtype=int)
    N, A = history.policies.shape[1:]
    states = history.states
    count = A ** len(states)
    if count > cap:
        raise EnumerationCapError(f"{count} deterministic policies exceed the enumeration cap {cap}")
    if T == 0:
        return RegretCurve(checkpoints, np.zeros(len(checkpoints)),
                           deterministic_policies(np.zeros(1), states, N, A)[0], True, count)

    def make(idx, pol):
        return np.moveaxis(deterministic_policies(idx, states, N, A), 0, -1)[None]

    best, arg = _gain_curves(history, count, make, checkpoints)
    return RegretCurve(checkpoints, best, deterministic_policies(arg[-1:], states, N, A)[0], True, count)


def _history_of(env, profiles, player) -> MdpHistory:
    stacked = _as_stacked(profiles)
    return env.mdp_history(stacked, player)


def swap_regret_exact(env, profiles: Sequence, player: int, cap: int = ENUMERATION_CAP):
    """(swap regret, maximizing swap table) of ``player`` over the profile sequence."""
    curve = swap_regret_curve(_history_of(env, profiles, player), None, cap)
    return float(curve.values[-1]), curve.argmax


def external_regret_exact(env, profiles: Sequence, player: int, cap: int = ENUMERATION_CAP):
    """(external regret, maximizing deterministic policy as one-hot rows)."""
    curve = external_regret_curve(_history_of(env, profiles, player), None, cap)
    return float(curve.values[-1]), curve.argmax


def ce_gap(env, profiles: Sequence, cap: int = ENUMERATION_CAP) -> np.ndarray:
    stacked = _as_stacked(profiles)
    T = stacked[0].shape[0]
    m = len(stacked)
    if T == 0:
        return np.zeros(m)
    return np.array([swap_regret_curve(env.mdp_history(stacked, i), None, cap).values[-1] / T
                     for i in range(m)])


def ce_deviation_gain(game, profiles: Sequence, player: int, max_inside: bool = True) -> float:
    """Deviation gain of the uniform mixture over ``profiles`` computed on the joint game.

    ``max_inside=True`` takes the best swap separately for each profile (the
    expectation of a max); ``False`` takes one swap for the whole mixture,
    which equals swap regret / T.
    """
    profiles = [list(p) for p in profiles]
    T = len(profiles)
    A = game.action_counts[player]
    states = game.nonterminal
    count = swap_count(len(states), A)
    tables = swap_tables(np.arange(count), states, game.n_states, A)
    gains = np.zeros((T, count))
    for t, prof in enumerate(profiles):
        base = joint_value(game, prof, player)
        for c, phi in enumerate(tables):
            dev = list(prof)
            dev[player] = apply_swap(prof[player], phi)
            gains[t, c] = base - joint_value(game, dev, player)
    if max_inside:
        return float(gains.max(axis=1).mean())
    return float(gains.mean(axis=0).max())


def decomposition_gap(history: MdpHistory, phi: np.ndarray) -> tuple[float, float]:
    """Return (sum_t V_t(pi_t) - V_t(phi(pi_t)),  sum_t sum_s q_t^phi(s) <Q_t(s,.), pi_t - phi(pi_t)>)."""
    lhs = 0.0
    rhs = 0.0
    s1 = history.initial
    for a, b, loss, kernel in _Chunks(history, 4096):
        pol = history.policies[a:b]
        dev = apply_swap(pol, phi)
        V, Q = backward_induction(history.layers, loss, kernel, pol)
        Vd, _ = backward_induction(history.layers, loss, kernel, dev)
        q = forward_occupancy(history.layers, kernel, dev)
        lhs += float((V[:, s1] - Vd[:, s1]).sum())
        rhs += float((q[..., None] * Q * (pol - dev)).sum())
    return lhs, rhs


def state_swap_regret(policies: np.ndarray, losses: np.ndarray) -> np.ndarray:
    """Per-state swap regret of the action sequences, shape ``(N,)``.

    ``policies`` ``(T, N, A)``, ``losses`` ``(T, N, A)``.  For a fixed state the
    best swap picks, for every source action, the target minimizing its
    weighted cumulative loss.
    """
    W = np.einsum("tsa,tsb->sab", policies, losses)  # W[s, a, b] = sum_t pi_t(a) l_t(b)
    own = np.einsum("saa->sa", W)
    return (own - W.min(-1)).sum(-1)


def weighted_regret(iterates, losses, weights, comparator) -> float:
    """sum_t q_t <x_t - x*, l_t>."""
    iterates = np.asarray(iterates, dtype=float)
    losses = np.asarray(losses, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or np.any(weights > 1):
        raise ValueError("weights must lie in [0, 1]")
    if len(weights) == 0:
        return 0.0
    return float((weights * ((iterates - np.asarray(comparator)) * losses).sum(-1)).sum())


def weighted_regret_bound(x_tilde, losses, hints, weights, comparator, eta) -> float:
    """Right-hand side of the weighted OOMD bound with the L1 norm (dual: L-infinity).

    ``x_tilde[t]`` for t = 0..T, ``losses``/``hints``/``weights`` for t = 1..T;
    the weight after the last round is taken as 0.
    """
    from .learner import log_barrier_divergence
    x_tilde = np.asarray(x_tilde, dtype=float)
    w = np.asarray(weights, dtype=float)
    T = len(w)
    if T == 0:
        return 0.0
    comp = np.asarray(comparator, dtype=float)
    D = log_barrier_divergence(comp[None], x_tilde)  # (T+1,)
    w_next = np.concatenate([w[1:], [0.0]])
    dual = np.abs(np.asarray(losses) - np.asarray(hints)).max(-1)
    return float(w[0] * D[0] / eta + ((w_next - w) * D[1:T + 1]).sum() / eta
                 + eta / 2 * (w * dual ** 2).sum())


# -- reports --------------------------------------------------------------------

@dataclass
class RegretReport:
    checkpoints: np.ndarray          # (K,) episode counts
    swap: np.ndarray                 # (m, K)
    external: np.ndarray             # (m, K)
    ce_gap: np.ndarray               # (m, K)
    path1: np.ndarray                # (m, K)
    path2: np.ndarray                # (m, K)
    swap_argmax: list = field(default_factory=list)
    external_argmax: list = field(default_factory=list)
    exact: list = field(default_factory=list)
    decomposition: list = field(default_factory=list)  # (lhs, rhs) per player

    @property
    def m(self) -> int:
        return self.swap.shape[0]


def cumulative_path_lengths(policies: np.ndarray, checkpoints, states=None):
    """First/second order path length up to each checkpoint c: sum_{t=1}^{c} ||pi_{t+1} - pi_t||."""
    d = policy_distance(policies[1:], policies[:-1], states) if len(policies) > 1 else np.zeros(0)
    c1 = np.concatenate([[0.0], np.cumsum(d)])
    c2 = np.concatenate([[0.0], np.cumsum(d ** 2)])
    idx = np.minimum(np.asarray(checkpoints, dtype=int), len(d))
    return c1[idx], c2[idx]


def regret_report(env, policies: Sequence[np.ndarray], checkpoints, cap: int = ENUMERATION_CAP,
                  external: bool = True, decomposition: bool = True) -> RegretReport:
    """Exact metrics for the played sequence.

    ``policies[i]`` holds ``T + 1`` policies (the last one is only used for
    path lengths); regret is evaluated on the first ``T``.
    """
    m = len(policies)
    T = policies[0].shape[0] - 1
    checkpoints = np.asarray(checkpoints, dtype=int)
    K = len(checkpoints)
    played = [p[:T] for p in policies]
    rep = RegretReport(checkpoints, np.zeros((m, K)), np.full((m, K), np.nan), np.zeros((m, K)),
                       np.zeros((m, K)), np.zeros((m, K)))
    for i in range(m):
        hist = env.mdp_history(played, i)
        N, A = hist.policies.shape[1:]
        count = swap_count(len(hist.states), A)
        if count > min(cap, 10 ** 6):
            log.warning("player %d: %d swap functions; reporting a labeled lower bound", i, count)
        curve = swap_regret_curve(hist, checkpoints, cap=min(cap, 10 ** 6), allow_lower_bound=True)
        rep.swap[i] = curve.values
        rep.swap_argmax.append(curve.argmax)
        rep.exact.append(curve.exact)
        if external and A ** len(hist.states) <= cap:
            ext = external_regret_curve(hist, checkpoints, cap)
            rep.external[i] = ext.values
            rep.external_argmax.append(ext.argmax)
        else:
            rep.external_argmax.append(None)
        with np.errstate(invalid="ignore", divide="ignore"):
            rep.ce_gap[i] = np.where(checkpoints > 0, curve.values / np.maximum(checkpoints, 1), 0.0)
        rep.path1[i], rep.path2[i] = cumulative_path_lengths(policies[i], checkpoints, hist.states)
        if decomposition and T > 0:
            rep.decomposition.append(decomposition_gap(hist, curve.argmax))
    return rep


# -- bound residuals --------------------------------------------------------------

@dataclass
class Residual:
    name: str
    player: str
    lhs: float
    rhs: float
    precondition: bool
    note: str = ""

    @property
    def residual(self) -> float:
        return self.rhs - self.lhs


def thm_full_info_rhs(H, S, A, m, gamma, eps, T):
    lg = math.log(1.0 / gamma)
    return (1e4 * H ** 4 * S * A ** 3 * m ** 2 * math.sqrt(lg) / gamma * np.sqrt(T)
            + 600 * m * H * math.sqrt(S) * A ** 1.5 / gamma * eps * T
            + 2 * gamma * A * H ** 2 * T
            + 150 * m * H ** 2 * S ** 1.5 * A ** 3.5 * lg)


def thm_regret_by_path_rhs(H, S, Ai, A, m, gamma, eta, eps, T, path1_all, path2_all):
    lg = math.log(1.0 / gamma)
    E = 4 * eta * eps ** 2 * S * T + eps * H * T + 2 * gamma * A * H * (H + eps) * T
    return (S * Ai ** 2 * lg / eta + 3 * Ai * H ** 2 / (eta * gamma) * path1_all
            + 4 * eta * m * S * Ai * H ** 4 * path2_all + E)


def thm_path_length_rhs(S, A, m, gamma, eps, T, H):
    return 768 * S * A ** 3 * m * math.log(1.0 / gamma) + 4 * eps ** 2 * T / (m * H ** 4)


def thm_state_rvu_rhs(Ai, gamma, eta, eps, T, H, m, path2_all, state_path_sq):
    return (Ai ** 2 * math.log(1.0 / gamma) / eta + 36 * eta * eps ** 2 * T
            + 4 * H ** 4 * m * eta * path2_all - state_path_sq / (576 * eta * Ai))


def thm_independent_rhs(A, gamma, eta, H, m, eps, T, path2_all):
    return (A ** 2 * math.log(1.0 / gamma) / eta + 24 * eta * H ** 4 * A * m * path2_all
            + eps * H * T + 8 * eta * eps ** 2 * T)


def cor_independent_rhs(H, S, A, m, T):
    return 288 * H ** 2 * S ** 1.5 * A ** 3.5 * m * math.log(T)


def _close(a, b):
    return abs(a - b) <= 1e-12 * max(abs(a), abs(b), 1e-300)


def bound_residuals(run, report: RegretReport) -> list[Residual]:
    """Evaluate each applicable bound at the run's parameters.

    ``run`` is a :class:`posr.runner.RunLog`.  Rows whose preconditions fail
    are still reported, with ``precondition=False`` and the reason in ``note``.
    """
    from .params import default_eta
    rows: list[Residual] = []
    m = len(run.policies)
    T_upd = run.policies[0].shape[0] - 1       # number of policy updates
    if T_upd <= 0:
        return rows
    H = run.horizon
    S = run.S
    A = run.A
    eta = run.params["eta"]
    gamma = run.params["gamma"]
    eps = run.realized_epsilon()
    eta_default = default_eta(H, m, S, A)
    states = [run.states(i) for i in range(m)]
    d = [policy_distance(run.policies[j][1:], run.policies[j][:-1], states[j]) for j in range(m)]
    path1_all = float(sum(x.sum() for x in d))
    path2_all = float(sum((x ** 2).sum() for x in d))
    final = report.checkpoints[-1] if len(report.checkpoints) else 0
    mode = run.mode
    label = "" if all(report.exact) else " (swap regret is a lower bound)"

    if mode == "ftrl_demo":
        for i in range(m):
            rows.append(Residual("ftrl_linear_regret_lower_bound", str(i), report.external[i, -1],
                                 final / 6, True,
                                 "claim: FTRL regret >= T/6, so here the residual rhs - lhs must be <= 0"))
        return rows

    if mode in ("full_info", "bandit_blocked"):
        pre = H >= 2 and gamma <= 1 / (2 * A) and _close(eta, eta_default)
        why = [] if pre else [f"needs H >= 2, gamma <= 1/(2A), eta = {eta_default:.6g}"]
        for i in range(m):
            if mode == "full_info":
                lhs = report.swap[i]
                rhs = np.array([thm_full_info_rhs(H, S, A, m, gamma, eps, int(c)) for c in report.checkpoints])
                k = int(np.argmin(rhs - lhs))
                rows.append(Residual("swap_regret_full_info[min over checkpoints]", str(i), float(lhs[k]),
                                     float(rhs[k]), pre, "; ".join(why) + label))
            Ai = run.action_counts[i]
            pre34 = H >= 2 and gamma <= 1 / (2 * Ai)
            if mode == "full_info":
                lhs34 = float(report.swap[i, -1])
                T34 = int(final)
            else:
                lhs34 = float(run.decimated_swap[i]) if run.decimated_swap is not None else float("nan")
                T34 = T_upd
            rows.append(Residual("swap_regret_by_path_length", str(i), lhs34,
                                 thm_regret_by_path_rhs(H, S, Ai, A, m, gamma, eta, eps, T34,
                                                        path1_all, path2_all),
                                 pre34, f"eps={eps:.3g}" + label))
        rows.append(Residual("second_order_path_length", "all", path2_all,
                             thm_path_length_rhs(S, A, m, gamma, eps, T_upd, H),
                             _close(eta, eta_default), f"eps={eps:.3g}"))
        for i in range(m):
            Ai = run.action_counts[i]
            sw = state_swap_regret(run.policies[i][:-1], run.q_hat[i])
            sq = (np.abs(run.policies[i][1:] - run.policies[i][:-1]).sum(-1) ** 2).sum(0)
            res = [thm_state_rvu_rhs(Ai, gamma, eta, eps, T_upd, H, m, path2_all, sq[s]) - sw[s]
                   for s in states[i]]
            k = int(np.argmin(res))
            s = int(states[i][k])
            rows.append(Residual(f"state_swap_rvu[min over states: s={s}]", str(i), float(sw[s]),
                                 float(sw[s] + res[k]), eta <= 1 / (128 * H), f"eps={eps:.3g}"))
        return rows

    if mode == "independent_transition":
        for i in range(m):
            Ai = run.action_counts[i]
            rows.append(Residual("independent_swap_regret_by_path_length", str(i), float(report.swap[i, -1]),
                                 thm_independent_rhs(A, gamma, eta, H, m, eps, int(final), path2_all),
                                 H >= 2 and gamma <= 1 / (2 * Ai), label.strip()))
            pre = (H >= 2 and _close(eta, eta_default) and _close(gamma, 1.0 / final)
                   and final >= 2 * A)
            rows.append(Residual("independent_log_regret", str(i), float(report.swap[i, -1]),
                                 cor_independent_rhs(H, S, A, m, int(final)), pre,
                                 ("" if pre else "needs eta default, gamma = 1/T, T >= 2A") + label))
        rows.append(Residual("second_order_path_length", "all", path2_all,
                             thm_path_length_rhs(S, A, m, gamma, eps, T_upd, H),
                             _close(eta, eta_default), ""))
        return rows
    raise ValueError(f"unknown mode {mode!r}")
