"""POSR agents: swap-regret policy optimization built from log-barrier OOMD bases.

Each player keeps, for every state ``s`` and own action ``a``, one optimistic
online mirror descent learner over the gamma-truncated simplex.  The base at
``(s, a)`` is charged ``g = pi(a|s) * Qhat(s, .)``; the state's next policy is
the stationary distribution of the row-stochastic matrix whose rows are the
base iterates (the external-to-swap reduction).

All per-(s, a) work is done on stacked arrays: ``x`` and ``x_tilde`` have shape
``(N, A, A)`` with axis 1 the base index and axis 2 the simplex coordinate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10


class ProxConvergenceError(RuntimeError):
    pass


class StationaryDistributionError(RuntimeError):
    pass


def log_barrier(x: np.ndarray) -> np.ndarray:
    return -np.log(x).sum(-1)


def log_barrier_divergence(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bregman divergence of the log-barrier, D(x, y)."""
    return (np.log(y / x) + (x - y) / y).sum(-1)


def local_norms(v: np.ndarray, x: np.ndarray):
    """Primal and dual local norms of ``v`` at ``x`` under the log-barrier Hessian."""
    primal = np.sqrt(((v / x) ** 2).sum(-1))
    dual = np.sqrt(((v * x) ** 2).sum(-1))
    return primal, dual


def _solve_multiplier(c, lo, hi, max_iter=200, guess=None):
    """Find lam with sum_a clip(1/(c_a + lam), lo, hi) = 1, row-wise.

    ``lo`` and ``hi`` are scalars or arrays broadcasting against ``c``
    (shape ``(..., 1)`` for per-row bounds).

    The clipped sum is continuous and nonincreasing in lam.  On the bracket
    ``[1 - min c, d - min c]`` every denominator is at least 1, the sum is
    >= 1 at the left end and <= 1 at the right end.  Newton steps on the
    unclamped coordinates are taken when they stay inside the bracket,
    bisection otherwise.  ``guess`` (inside the bracket) warm-starts the search.
    """
    d = c.shape[-1]
    cmin = c.min(-1)
    lam_lo = 1.0 - cmin
    lam_hi = d - cmin
    # Narrow the bracket to two consecutive clamp breakpoints: between them the
    # set of free coordinates is fixed and Newton converges fast.
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.all(lo > 0):
        bp = np.concatenate([np.broadcast_to(1.0 / lo - c, c.shape), 1.0 / hi - c], axis=-1)
    else:
        bp = 1.0 / hi - c
    bp = np.clip(bp, lam_lo[..., None], lam_hi[..., None])
    lo_b = lo[..., None] if lo.ndim else lo
    hi_b = hi[..., None] if hi.ndim else hi
    fb = np.minimum(np.maximum(1.0 / (c[..., None, :] + bp[..., :, None]), lo_b), hi_b).sum(-1) - 1.0
    lam_lo = np.maximum(lam_lo, np.where(fb >= 0, bp, -np.inf).max(-1))
    lam_hi = np.minimum(lam_hi, np.where(fb <= 0, bp, np.inf).min(-1))
    lam = lam_lo.copy()
    if guess is not None:
        inside = (guess > lam_lo) & (guess < lam_hi)
        lam = np.where(inside, guess, lam)
    for it in range(max_iter):
        raw = 1.0 / (c + lam[..., None])
        x = np.minimum(np.maximum(raw, lo), hi)
        f = x.sum(-1) - 1.0
        if np.all(np.abs(f) <= 1e-15):
            return x, lam, it
        lam_lo = np.where(f > 0, lam, lam_lo)
        lam_hi = np.where(f < 0, lam, lam_hi)
        free = (raw > lo) & (raw < hi)
        df = -(np.where(free, raw, 0.0) ** 2).sum(-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = lam - f / df
        ok = np.isfinite(newton) & (newton > lam_lo) & (newton < lam_hi)
        nxt = np.where(ok, newton, 0.5 * (lam_lo + lam_hi))
        stalled = nxt == lam
        lam = np.where(np.abs(f) <= 1e-15, lam, nxt)
        if np.all(stalled | (np.abs(f) <= 1e-15)):
            break
    it_used = it + 1
    x = np.clip(1.0 / (c + lam[..., None]), lo, hi)
    err = np.abs(x.sum(-1) - 1.0)
    if np.any(err > SUM_TOL):
        raise ProxConvergenceError(
            f"multiplier search left a simplex residual of {err.max():.3e} after {it_used} iterations")
    return x, lam, it_used


@dataclass
class ProxResult:
    x: np.ndarray
    multiplier: np.ndarray
    iterations: int


def bregman_prox_full(y, g, eta, gamma) -> ProxResult:
    """argmin over the gamma-truncated simplex of eta<g, x> + D(x, y), row-wise.

    ``y`` and ``g`` share shape ``(..., d)``; ``eta`` and ``gamma`` are scalars
    or carry one value per row.  Rows whose loss is identically zero return
    ``y`` unchanged.
    """
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    d = y.shape[-1]
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(gamma * d > 1.0):
        raise ValueError(f"gamma={gamma} leaves the truncated simplex empty for d={d}")
    # per-row parameters broadcast over the simplex coordinate
    gam = gamma[..., None] if gamma.ndim else gamma
    et = eta[..., None] if eta.ndim else eta
    c = et * g + 1.0 / y
    # first-order estimate of the multiplier when x stays near y
    y2 = y * y
    guess = -(et * y2 * g).sum(-1) / y2.sum(-1)
    x, lam, it = _solve_multiplier(c, gam, 1.0 - (d - 1) * gam, guess=guess)
    idle = np.all(g == 0.0, axis=-1)
    if np.any(idle):
        x = np.where(idle[..., None], y, x)
        lam = np.where(idle, 0.0, lam)
    return ProxResult(x, lam, it)


def bregman_prox(y, g, eta, gamma) -> np.ndarray:
    return bregman_prox_full(y, g, eta, gamma).x


def prox_kkt_residual(x, y, g, eta, gamma, multiplier) -> np.ndarray:
    """Largest violation of the optimality conditions of the prox problem, row-wise.

    Checks the simplex constraint, the lower bound, stationarity on free
    coordinates (as the relative error of ``x (eta g + 1/y + lam) = 1``) and
    the sign of the implied bound multipliers on clamped ones.
    """
    d = x.shape[-1]
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    gamma = gamma[..., None] if gamma.ndim else gamma
    eta = eta[..., None] if eta.ndim else eta
    cap = 1.0 - (d - 1) * gamma
    denom = eta * g + 1.0 / y + multiplier[..., None]
    at_lo = np.isclose(x, gamma, rtol=0, atol=1e-15)
    at_hi = np.isclose(x, cap, rtol=0, atol=1e-15) & ~at_lo
    free = ~(at_lo | at_hi)
    stat = np.where(free, np.abs(x * denom - 1.0), 0.0)
    # clamped at gamma: the unconstrained optimum lies below gamma
    lo_viol = np.where(at_lo, np.maximum(0.0, 1.0 - gamma * denom), 0.0)
    hi_viol = np.where(at_hi & (denom > 0), np.maximum(0.0, cap * denom - 1.0), 0.0)
    feas = np.maximum(0.0, gamma - x)
    per_row = np.maximum.reduce([stat, lo_viol, hi_viol, feas]).max(-1)
    return np.maximum(per_row, np.abs(x.sum(-1) - 1.0))


@dataclass
class BaseState:
    """One OOMD learner: primary iterate, intermediate iterate and last loss."""

    x: np.ndarray
    x_tilde: np.ndarray
    hint: np.ndarray

    @classmethod
    def initial(cls, d: int) -> "BaseState":
        u = np.full(d, 1.0 / d)
        return cls(u.copy(), u.copy(), np.zeros(d))


def oomd_step(base: BaseState, g, eta, gamma) -> BaseState:
    """One round: x_tilde_t from x_tilde_{t-1}, then x_{t+1} from x_tilde_t, both with g_t."""
    x_tilde = bregman_prox(base.x_tilde, g, eta, gamma)
    x_next = bregman_prox(x_tilde, g, eta, gamma)
    return BaseState(x_next, x_tilde, np.array(g, dtype=float))


def oomd_trajectory(losses, eta, gamma):
    """Run a single OOMD learner on ``losses`` of shape ``(T, d)``.

    Returns ``(x, x_tilde)``: ``x[t]`` is the iterate played in round ``t+1``
    (so ``x[0]`` is uniform and ``x[T]`` the one after the last loss) and
    ``x_tilde[t]`` is the intermediate iterate after ``t`` losses.
    """
    losses = np.asarray(losses, dtype=float)
    T, d = losses.shape
    base = BaseState.initial(d)
    xs = [base.x]
    xts = [base.x_tilde]
    for t in range(T):
        base = oomd_step(base, losses[t], eta, gamma)
        xs.append(base.x)
        xts.append(base.x_tilde)
    return np.array(xs), np.array(xts)


def _power_iteration(rows, tol=1e-12, max_iter=100_000):
    d = rows.shape[-1]
    pi = np.full(rows.shape[:-1], 1.0 / d)
    for _ in range(max_iter):
        nxt = np.einsum("...a,...ab->...b", pi, rows)
        if np.max(np.abs(nxt - pi)) <= tol:
            return nxt
        pi = nxt
    return pi


def stationary_distribution(rows) -> np.ndarray:
    """pi with pi(b) = sum_a pi(a) rows[a, b], for stacked ``(..., d, d)`` matrices.

    Solves ``(B^T - I) pi = 0`` with one equation replaced by ``sum pi = 1``;
    rows whose residual exceeds the tolerance are recomputed by power
    iteration.
    """
    rows = np.asarray(rows, dtype=float)
    d = rows.shape[-1]
    M = np.swapaxes(rows, -1, -2) - np.eye(d)
    M[..., -1, :] = 1.0
    rhs = np.zeros(rows.shape[:-1])
    rhs[..., -1] = 1.0
    pi = np.linalg.solve(M, rhs[..., None])[..., 0]
    resid = np.abs(np.einsum("...a,...ab->...b", pi, rows) - pi).max(-1)
    bad = resid > STATIONARY_TOL
    if np.any(bad):
        pi = np.array(pi)
        pi[bad] = _power_iteration(rows[bad])
        resid = np.abs(np.einsum("...a,...ab->...b", pi, rows) - pi).max(-1)
        if np.any(resid > STATIONARY_TOL):
            raise StationaryDistributionError(
                f"stationary distribution residual {resid.max():.3e} after fallback")
    return pi


def stationary_residual(rows, pi) -> np.ndarray:
    return np.abs(np.einsum("...a,...ab->...b", pi, rows) - pi).max(-1)


@dataclass
class AgentState:
    player: int
    gamma: float
    eta: float
    x: np.ndarray        # (N, A, A) primary iterates, one row per base
    x_tilde: np.ndarray  # (N, A, A) intermediate iterates
    hint: np.ndarray     # (N, A, A) last loss fed to each base
    policy: np.ndarray   # (N, A)

    def base(self, s: int, a: int) -> BaseState:
        return BaseState(self.x[s, a].copy(), self.x_tilde[s, a].copy(), self.hint[s, a].copy())


def posr_init(player: int, n_states: int, n_actions: int, gamma: float, eta: float) -> AgentState:
    """Uniform bases and uniform policy; the log-barrier minimizer on the truncated simplex is uniform."""
    if not 0 < gamma <= 1.0 / (2 * n_actions):
        raise ValueError(
            f"gamma={gamma} outside (0, 1/(2A)] = (0, {1.0 / (2 * n_actions)}] for A={n_actions}")
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    u = np.full((n_states, n_actions, n_actions), 1.0 / n_actions)
    return AgentState(player, float(gamma), float(eta), u.copy(), u.copy(),
                      np.zeros_like(u), np.full((n_states, n_actions), 1.0 / n_actions))


def base_losses(policy: np.ndarray, q_hat: np.ndarray) -> np.ndarray:
    """g[s, a, :] = pi(a|s) * Qhat(s, :)."""
    return policy[:, :, None] * q_hat[:, None, :]


def posr_update(agent: AgentState, q_hat: np.ndarray) -> AgentState:
    q_hat = np.asarray(q_hat, dtype=float)
    if q_hat.shape != agent.policy.shape:
        raise ValueError(f"q_hat shape {q_hat.shape} != policy shape {agent.policy.shape}")
    g = base_losses(agent.policy, q_hat)
    x_tilde = bregman_prox(agent.x_tilde, g, agent.eta, agent.gamma)
    x = bregman_prox(x_tilde, g, agent.eta, agent.gamma)
    changed = np.any(g != 0.0, axis=(1, 2))
    policy = agent.policy.copy()
    if np.any(changed):
        policy[changed] = stationary_distribution(x[changed])
    return replace(agent, x=x, x_tilde=x_tilde, hint=g, policy=policy)


def agent_to_dict(agent: AgentState) -> dict:
    return {
        "player": agent.player,
        "gamma": agent.gamma,
        "eta": agent.eta,
        "x": agent.x.tolist(),
        "x_tilde": agent.x_tilde.tolist(),
        "hint": agent.hint.tolist(),
        "policy": agent.policy.tolist(),
    }


def agent_from_dict(data: dict) -> AgentState:
    return AgentState(int(data["player"]), float(data["gamma"]), float(data["eta"]),
                      np.array(data["x"], dtype=float), np.array(data["x_tilde"], dtype=float),
                      np.array(data["hint"], dtype=float), np.array(data["policy"], dtype=float))


def dumps_agent(agent: AgentState) -> str:
    return json.dumps(agent_to_dict(agent)) + "\n"


def loads_agent(text: str) -> AgentState:
    return agent_from_dict(json.loads(text))


# -- FTRL baseline ---------------------------------------------------------

@dataclass
class FtrlAgentState:
    eta: float
    regularizer: str  # "entropy" or "log_barrier"
    cum_loss: np.ndarray
    policy: np.ndarray


def ftrl_policy(cum_loss: np.ndarray, eta: float, regularizer: str) -> np.ndarray:
    """argmin over the simplex of eta<L, x> + R(x), row-wise."""
    c = eta * np.asarray(cum_loss, dtype=float)
    if regularizer == "entropy":
        z = -(c - c.min(-1, keepdims=True))
        w = np.exp(z)
        return w / w.sum(-1, keepdims=True)
    if regularizer == "log_barrier":
        x, _, _ = _solve_multiplier(c - c.min(-1, keepdims=True), 0.0, 1.0)
        return x
    raise ValueError(f"unknown regularizer {regularizer!r}")


def ftrl_init(n_states: int, n_actions: int, eta: float, regularizer: str = "entropy") -> FtrlAgentState:
    cum = np.zeros((n_states, n_actions))
    return FtrlAgentState(float(eta), regularizer, cum, ftrl_policy(cum, eta, regularizer))


def ftrl_po_update(agent: FtrlAgentState, q_hat: np.ndarray) -> FtrlAgentState:
    cum = agent.cum_loss + np.asarray(q_hat, dtype=float)
    return replace(agent, cum_loss=cum, policy=ftrl_policy(cum, agent.eta, agent.regularizer))
