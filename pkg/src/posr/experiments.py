"""Glue between a configuration, the run loops and the metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .envs import build_ftrl_counterexample, generate_independent_transition_game, generate_random_game
from .estimation import min_reachability
from .game import validate_game
from .gamefile import load_game
from .metrics import RegretReport, Residual, bound_residuals, log_checkpoints, regret_report, swap_regret_curve
from .runner import DEMO_POSR_ETA, RunLog, run_bandit, run_ftrl_demo, run_full_info, run_independent

log = logging.getLogger(__name__)


class InvalidGameError(ValueError):
    pass


def build_env(config: ExperimentConfig):
    """The environment a config describes; generated games use ``default_rng(seed)``."""
    if config.mode == "ftrl_demo":
        return build_ftrl_counterexample(config.T)
    rng = np.random.default_rng(config.seed)
    if config.mode == "independent_transition":
        return generate_independent_transition_game(config.players, config.horizon,
                                                    config.states_per_layer, config.actions, rng)
    if config.game is not None:
        game = load_game(config.game)
    else:
        game = generate_random_game(config.players, config.horizon, config.states_per_layer,
                                    config.actions, rng)
    report = validate_game(game)
    if not report.ok:
        raise InvalidGameError("invalid game:\n  " + "\n  ".join(report.issues))
    return game


@dataclass
class Analysis:
    report: RegretReport
    residuals: list[Residual]
    checks: dict = field(default_factory=dict)


def kernels_episode_invariant(run: RunLog, samples: int = 8) -> bool:
    """Exact equality of every player's induced kernel at a spread of recorded profiles."""
    env = run.env
    idx = np.unique(np.linspace(0, run.updates, min(samples, run.updates + 1)).astype(int))
    for i in range(run.m):
        ref = None
        for t in idx:
            k = env.induced([p[t] for p in run.policies], i, int(t) + 1).kernel
            if ref is None:
                ref = k
            elif not np.array_equal(ref, k):
                return False
    return True


def analyze(run: RunLog, n_checkpoints: int = 32) -> Analysis:
    """Regret report, bound residuals and the consistency checks of a finished run."""
    checks: dict = {}
    if run.mode == "bandit_blocked":
        episode_policies = run.played_episode_policies()
        cps = log_checkpoints(run.episodes, n_checkpoints) if run.episodes else np.zeros(0, int)
        report = regret_report(run.env, episode_policies, cps)
        dec = np.zeros(run.m)
        for i in range(run.m):
            hist = run.env.mdp_history([p[:-1] for p in run.policies], i)
            dec[i] = swap_regret_curve(hist, [run.updates], allow_lower_bound=True).values[-1]
        run.decimated_swap = dec
        if len(cps):
            expanded = report.swap[:, -1]
            checks["blocked_swap_regret"] = [float(x) for x in expanded]
            checks["block_times_decimated_swap_regret"] = [float(run.block * x) for x in dec]
            checks["blocked_identity_max_rel_error"] = float(
                np.max(np.abs(expanded - run.block * dec) / np.maximum(np.abs(expanded), 1.0)))
        checks["realized_epsilon"] = run.realized_epsilon()
    else:
        cps = log_checkpoints(run.updates, n_checkpoints) if run.updates else np.zeros(0, int)
        report = regret_report(run.env, run.policies, cps)
    if report.decomposition:
        checks["decomposition_max_abs_gap"] = float(max(abs(a - b) for a, b in report.decomposition))
    if run.mode == "independent_transition":
        checks["induced_kernels_episode_invariant"] = kernels_episode_invariant(run)
    return Analysis(report, bound_residuals(run, report), checks)


def execute(config: ExperimentConfig) -> tuple[RunLog, Analysis]:
    """Build the environment, run the configured mode and analyze it (not for ftrl_demo)."""
    config.validate()
    env = build_env(config)
    if config.mode == "full_info":
        run = run_full_info(env, config.T, config.eta, config.gamma, seed=config.seed)
    elif config.mode == "independent_transition":
        run = run_independent(env, config.T, config.eta, config.gamma, seed=config.seed)
    elif config.mode == "bandit_blocked":
        beta, z = min_reachability(env)
        if beta <= 0:
            raise InvalidGameError(f"state {z} is unreachable under some policy (beta = 0)")
        run = run_bandit(env, config.T, config.seed, beta, config.delta, config.eta, config.gamma,
                         config.epsilon, config.block, config.normalization)
    else:
        raise ValueError("ftrl_demo runs through run_demo")
    return run, analyze(run, config.checkpoints)


def demo_posr_horizons(T: int) -> tuple[int, int]:
    short = max(3, (T // 10) - (T // 10) % 3)
    return (short, T)


def run_demo(config: ExperimentConfig):
    config.validate()
    eta = DEMO_POSR_ETA if config.eta is None else config.eta
    return run_ftrl_demo(config.T, posr_T=demo_posr_horizons(config.T), posr_eta=eta,
                         posr_gamma=config.gamma)


__all__ = ["build_env", "analyze", "execute", "run_demo", "Analysis", "InvalidGameError",
           "kernels_episode_invariant"]
