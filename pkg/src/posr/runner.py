"""Run loops: full information, blocked bandit feedback, FTRL comparison, independent transitions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .envs import ScriptedNonStationaryMdp, build_ftrl_counterexample
from .estimation import BlockConfig, block_seed_sequence, estimate_q, sample_episodes
from .game import MarkovGame, backward_induction, evaluate, induce_mdp
from .independent import IndependentGame
from .learner import ftrl_init, ftrl_po_update, posr_init, posr_update
from .metrics import external_regret_curve, log_checkpoints, swap_regret_curve
from .params import resolve_bandit, resolve_full_info, resolve_independent

log = logging.getLogger(__name__)


@dataclass
class RunLog:
    """Everything a report needs.

    ``policies[i]`` has ``U + 1`` entries for ``U`` policy updates (the
    initial policy and one after every update).  In full-information modes
    an update happens every episode; in blocked mode every ``block``
    episodes, and ``realized`` has one row per episode.
    """

    mode: str
    env: object
    policies: list
    q_hat: list                         # (U, N_i, A_i) per player, what each update consumed
    q_true: list                        # exact Q of the played profile, same shape
    values: np.ndarray                  # (U, m) V(s_1) of the played profile
    realized: np.ndarray                # (episodes, m)
    episode_block: np.ndarray           # (episodes,)
    params: dict
    provenance: dict
    seed: int | None = None
    block: int = 1
    counts: list | None = None          # (U, N_i, A_i) visits, blocked mode
    flags: list = field(default_factory=list)
    bases: list | None = None           # (U + 1, N_i, A_i, A_i) base iterates when recorded
    decimated_swap: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.policies)

    @property
    def horizon(self) -> int:
        return int(self.env.horizon)

    @property
    def action_counts(self) -> tuple:
        return tuple(self.env.action_counts)

    @property
    def S(self) -> int:
        return int(self.env.S)

    @property
    def A(self) -> int:
        return int(self.env.A)

    @property
    def updates(self) -> int:
        return self.policies[0].shape[0] - 1

    @property
    def episodes(self) -> int:
        return self.realized.shape[0]

    def states(self, i: int) -> np.ndarray:
        layers = self.env.player_layers(i)
        return np.array([s for layer in layers[:-1] for s in layer], dtype=int)

    def realized_epsilon(self) -> float:
        """max over updates, players and non-terminal cells of |Qhat - Q|."""
        if self.mode != "bandit_blocked":
            return 0.0
        err = 0.0
        for i in range(self.m):
            st = self.states(i)
            if self.q_hat[i].shape[0]:
                err = max(err, float(np.abs(self.q_hat[i][:, st] - self.q_true[i][:, st]).max()))
        return err

    def played_episode_policies(self) -> list:
        """Per-episode policies (episodes + 1 entries): each block's policy repeated ``block`` times."""
        out = []
        for p in self.policies:
            rep = np.repeat(p[:-1], self.block, axis=0)
            out.append(np.concatenate([rep, p[-1:]]))
        return out


def _exact_q(env, profile, t):
    """Exact Q and V(s_1) of every player for the profile at 1-based episode ``t``."""
    qs, vs = [], []
    for i in range(env.n_players):
        mdp = env.induced(profile, i, t)
        vt = evaluate(mdp, profile[i])
        qs.append(vt.Q)
        vs.append(vt.V[mdp.layers[0][0]])
    return qs, np.array(vs)


def _n_states(env, i):
    if isinstance(env, IndependentGame):
        return env.n_states(i)
    if isinstance(env, ScriptedNonStationaryMdp):
        return env.n_states_total
    return env.n_states


def run_posr(env, T: int, eta: float, gamma: float, mode: str, provenance: dict | None = None,
             record_bases: bool = False, seed: int | None = None) -> RunLog:
    """Full-information POSR: every player sees its exact Q each episode."""
    m = env.n_players
    agents = [posr_init(i, _n_states(env, i), env.action_counts[i], gamma, eta) for i in range(m)]
    pols = [[a.policy] for a in agents]
    bases = [[a.x] for a in agents] if record_bases else None
    qs = [[] for _ in range(m)]
    values = np.zeros((T, m))
    for t in range(1, T + 1):
        profile = [a.policy for a in agents]
        q, v = _exact_q(env, profile, t)
        values[t - 1] = v
        for i in range(m):
            agents[i] = posr_update(agents[i], q[i])
            qs[i].append(q[i])
            pols[i].append(agents[i].policy)
            if record_bases:
                bases[i].append(agents[i].x)
    qarr = [np.array(x).reshape(T, *agents[i].policy.shape) for i, x in enumerate(qs)]
    return RunLog(
        mode=mode, env=env, policies=[np.array(p) for p in pols], q_hat=qarr, q_true=qarr,
        values=values, realized=values.copy(), episode_block=np.arange(T),
        params={"eta": float(eta), "gamma": float(gamma), "epsilon": 0.0, "T": int(T)},
        provenance=dict(provenance or {}), seed=seed,
        bases=[np.array(b) for b in bases] if record_bases else None)


def run_full_info(game: MarkovGame, T: int, eta=None, gamma=None, record_bases=False, seed=None) -> RunLog:
    res = resolve_full_info(game.horizon, game.n_players, game.S, game.A, T, eta, gamma)
    log.info("resolved parameters: %s", res.provenance)
    run = run_posr(game, T, res["eta"], res["gamma"], "full_info", res.provenance, record_bases, seed)
    return run


def run_independent(game: IndependentGame, T: int, eta=None, gamma=None, record_bases=False,
                    seed=None) -> RunLog:
    res = resolve_independent(game.horizon, game.n_players, game.S, game.A, T, eta, gamma)
    log.info("resolved parameters: %s", res.provenance)
    return run_posr(game, T, res["eta"], res["gamma"], "independent_transition", res.provenance,
                    record_bases, seed)


def run_blocked(game: MarkovGame, agents, T: int, config: BlockConfig, seed: int,
                provenance: dict | None = None) -> RunLog:
    """Blocked bandit feedback: hold policies for ``config.block`` episodes, estimate, update.

    ``T`` is rounded down to a multiple of the block length.  Block ``k``
    draws its episodes from a stream spawned from ``seed`` with key ``k``.
    """
    B = config.block
    K = T // B
    flags = []
    if K * B != T:
        flags.append(f"T={T} rounded down to {K * B} (multiple of block length {B})")
        log.info(flags[-1])
    m = game.n_players
    agents = list(agents)
    pols = [[a.policy] for a in agents]
    q_hat = [[] for _ in range(m)]
    q_true = [[] for _ in range(m)]
    counts = [[] for _ in range(m)]
    values = np.zeros((K, m))
    realized = np.zeros((K * B, m))
    for k in range(K):
        profile = [a.policy for a in agents]
        rng = np.random.default_rng(block_seed_sequence(seed, k))
        batch = sample_episodes(game, profile, B, rng)
        realized[k * B:(k + 1) * B] = batch.losses.sum(1)
        q, v = _exact_q(game, profile, k + 1)
        values[k] = v
        for i in range(m):
            est = estimate_q(batch, i, game, config.normalization)
            if est.flagged:
                flags.append(f"block {k}, player {i}: {int(est.unvisited.sum())} unvisited cells (q_hat = 0)")
            agents[i] = posr_update(agents[i], est.q_hat)
            q_hat[i].append(est.q_hat)
            q_true[i].append(q[i])
            counts[i].append(est.counts)
            pols[i].append(agents[i].policy)
    shape = [a.policy.shape for a in agents]
    return RunLog(
        mode="bandit_blocked", env=game, policies=[np.array(p) for p in pols],
        q_hat=[np.array(x).reshape(K, *shape[i]) for i, x in enumerate(q_hat)],
        q_true=[np.array(x).reshape(K, *shape[i]) for i, x in enumerate(q_true)],
        values=values, realized=realized, episode_block=np.repeat(np.arange(K), B),
        params={"eta": agents[0].eta, "gamma": agents[0].gamma, "epsilon": config.epsilon,
                "delta": config.delta, "beta": config.beta, "block": B, "T": K * B},
        provenance=dict(provenance or {}), seed=seed, block=B,
        counts=[np.array(x).reshape(K, *shape[i]) for i, x in enumerate(counts)], flags=flags)


def run_bandit(game: MarkovGame, T: int, seed: int, beta: float, delta=0.1, eta=None, gamma=None,
               epsilon=None, block=None, normalization="visits") -> RunLog:
    res = resolve_bandit(game.horizon, game.n_players, game.S, game.A, T, beta, delta, eta, gamma,
                         epsilon, block)
    log.info("resolved parameters: %s", res.provenance)
    agents = [posr_init(i, game.n_states, game.action_counts[i], res["gamma"], res["eta"])
              for i in range(game.n_players)]
    cfg = BlockConfig(res["block"], res["epsilon"], res["delta"], beta, normalization)
    if cfg.block > T:
        raise ValueError(f"block length {cfg.block} exceeds T={T}; raise T or pass --block")
    return run_blocked(game, agents, T, cfg, seed, res.provenance)


# -- FTRL comparison ------------------------------------------------------------

def run_ftrl(env: ScriptedNonStationaryMdp, eta: float, regularizer: str) -> RunLog:
    agent = ftrl_init(env.n_states_total, 2, eta, regularizer)
    T = env.T
    pols = [agent.policy]
    qs = []
    values = np.zeros((T, 1))
    for t in range(1, T + 1):
        q, v = _exact_q(env, [agent.policy], t)
        values[t - 1] = v
        agent = ftrl_po_update(agent, q[0])
        qs.append(q[0])
        pols.append(agent.policy)
    qarr = np.array(qs)
    return RunLog("ftrl_demo", env, [np.array(pols)], [qarr], [qarr], values, values.copy(),
                  np.arange(T), {"eta": float(eta), "gamma": 0.0, "epsilon": 0.0, "T": T,
                                 "regularizer": regularizer}, {"eta": "grid"})


def external_regret_of(run: RunLog, player: int = 0) -> float:
    hist = run.env.mdp_history([p[:-1] for p in run.policies], player)
    return float(external_regret_curve(hist).values[-1])


def swap_regret_of(run: RunLog, player: int = 0) -> float:
    hist = run.env.mdp_history([p[:-1] for p in run.policies], player)
    return float(swap_regret_curve(hist).values[-1])


DEFAULT_ETA_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
DEFAULT_POSR_T = (300, 3000)
# Tuned on this environment (see the decisions ledger); the step-size formula
# for games is far too conservative for a single agent on a 3-step MDP.
DEMO_POSR_ETA = 1.0


@dataclass
class FtrlDemoReport:
    T: int
    ftrl: list            # dicts: regularizer, eta, external_regret, swap_regret
    posr: list            # dicts: T, eta, gamma, external_regret, swap_regret, ratio
    kernel_variation: dict
    optimal_total_loss: float
    ftrl_runs: list = field(default_factory=list)
    posr_runs: list = field(default_factory=list)


def run_ftrl_demo(T: int = 3000, eta_grid: Sequence[float] = DEFAULT_ETA_GRID,
                  regularizers: Sequence[str] = ("entropy", "log_barrier"),
                  posr_T: Sequence[int] = DEFAULT_POSR_T, posr_eta: float = DEMO_POSR_ETA,
                  posr_gamma=None, keep_runs: bool = False) -> FtrlDemoReport:
    env = build_ftrl_counterexample(T)
    ftrl_rows, ftrl_runs = [], []
    for reg in regularizers:
        for eta in eta_grid:
            run = run_ftrl(env, eta, reg)
            ftrl_rows.append({"regularizer": reg, "eta": float(eta),
                              "external_regret": external_regret_of(run),
                              "swap_regret": swap_regret_of(run)})
            if keep_runs:
                ftrl_runs.append(run)
    posr_rows, posr_runs = [], []
    for Tp in posr_T:
        e = build_ftrl_counterexample(Tp)
        g = posr_gamma if posr_gamma is not None else e.T ** -0.5
        run = run_posr(e, e.T, posr_eta, g, "ftrl_demo",
                       {"eta": "demo setting", "gamma": "override" if posr_gamma else "T^-1/2"})
        ext = external_regret_of(run)
        posr_rows.append({"T": e.T, "eta": posr_eta, "gamma": g, "external_regret": ext,
                          "swap_regret": swap_regret_of(run), "ratio": ext / e.T})
        if keep_runs:
            posr_runs.append(run)
    # the optimal policy never reaches L1
    pi = env.optimal_policy()
    opt = 0.0
    for t in (1, env.switch + 1):
        V, _ = backward_induction(env.layers, env.loss, env.kernel_at(t), pi)
        n = env.switch if t == 1 else env.T - env.switch
        opt += n * V[0]
    return FtrlDemoReport(env.T, ftrl_rows, posr_rows, env.kernel_variation(), float(opt),
                          ftrl_runs, posr_runs)


__all__ = ["RunLog", "run_full_info", "run_independent", "run_blocked", "run_bandit", "run_posr",
           "run_ftrl", "run_ftrl_demo", "FtrlDemoReport", "log_checkpoints", "induce_mdp"]
