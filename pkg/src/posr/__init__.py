"""Swap-regret policy optimization (POSR) for layered finite-horizon Markov games."""

from .config import ExperimentConfig
from .envs import (ScriptedNonStationaryMdp, build_ftrl_counterexample, generate_independent_transition_game,
                   generate_random_game)
from .estimation import estimate_q, min_reachability, sample_episodes
from .game import (InducedMdp, MarkovGame, apply_swap, evaluate, induce_mdp, joint_value, occupancy,
                   validate_game)
from .gamefile import load_game, save_game
from .independent import IndependentGame
from .learner import AgentState, bregman_prox, posr_init, posr_update, stationary_distribution
from .metrics import (RegretReport, bound_residuals, ce_gap, external_regret_exact, regret_report,
                      swap_regret_exact)
from .runner import RunLog, run_bandit, run_ftrl_demo, run_full_info, run_independent

__version__ = "0.1.0"
