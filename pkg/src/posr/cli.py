"""Command line entry point: ``posr <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .estimation import min_reachability
from .experiments import InvalidGameError, analyze, build_env, execute, run_demo
from .game import validate_game
from .gamefile import GameFormatError, load_game, save_game
from .reports import ReportError, emit_ftrl_demo, emit_reports, load_run, save_run

MODE_OF = {"run-full": "full_info", "run-bandit": "bandit_blocked", "ftrl-demo": "ftrl_demo",
           "run-independent": "independent_transition"}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--game", help="game file (JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--players", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--states-per-layer", dest="states_per_layer", type=int)
    p.add_argument("--actions", type=int)


def _run_flags(p: argparse.ArgumentParser):
    p.add_argument("--T", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--block", type=int)
    p.add_argument("--checkpoints", type=int)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posr", description="swap-regret policy optimization in Markov games")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("validate", help="check a game file or a generated game")
    _common(p)
    p.add_argument("--out", help="also write the (generated) game to this file")
    p = sub.add_parser("reach", help="minimum reachability beta of a game")
    _common(p)
    for name in MODE_OF:
        p = sub.add_parser(name, help=f"{MODE_OF[name]} run")
        _common(p)
        _run_flags(p)
    p = sub.add_parser("report", help="recompute metrics and rewrite outputs of a finished run")
    p.add_argument("--out", required=True, help="directory written by a run subcommand")
    p.add_argument("--checkpoints", type=int)
    return parser


def _config(args, mode=None) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    keys = ("game", "seed", "players", "horizon", "states_per_layer", "actions", "T", "eta", "gamma",
            "epsilon", "delta", "block", "checkpoints", "out")
    kw = {k: getattr(args, k, None) for k in keys}
    if mode is not None:
        kw["mode"] = mode
    return base.with_overrides(**kw).validate()


def _game(args):
    cfg = _config(args, "full_info")
    return cfg, build_env(cfg)


def cmd_validate(args) -> int:
    cfg = _config(args, "full_info")
    if cfg.game is not None:
        game = load_game(cfg.game)
    else:
        game = build_env(cfg)
    rep = validate_game(game)
    if not rep.ok:
        print("invalid")
        for issue in rep.issues:
            print(f"  {issue}")
        return 1
    print(f"valid\tplayers={game.n_players}\thorizon={game.horizon}\tS={game.S}\t"
          f"actions={','.join(map(str, game.action_counts))}")
    if args.out:
        save_game(game, args.out)
    return 0


def cmd_reach(args) -> int:
    _, game = _game(args)
    beta, z = min_reachability(game)
    print(f"beta\t{beta!r}\nstate\t{z}")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args, MODE_OF[args.command])
    if cfg.mode == "ftrl_demo":
        rep = run_demo(cfg)
        files = emit_ftrl_demo(rep, cfg.out, cfg)
    else:
        run, analysis = execute(cfg)
        files = emit_reports(run, analysis, cfg.out, cfg)
        save_run(run, Path(cfg.out, "run.npz"))
        files.append(Path(cfg.out, "run.npz"))
        if cfg.game is None and cfg.mode != "independent_transition":
            save_game(run.env, Path(cfg.out, "game.json"))
            files.append(Path(cfg.out, "game.json"))
    print("\n".join(str(f) for f in files))
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    cfg = ExperimentConfig.load(out / "config.json")
    if args.checkpoints is not None:
        cfg = cfg.with_overrides(checkpoints=args.checkpoints)
    if cfg.mode == "ftrl_demo":
        files = emit_ftrl_demo(run_demo(cfg), out, cfg)
    else:
        run = load_run(out / "run.npz", build_env(cfg))
        files = emit_reports(run, analyze(run, cfg.checkpoints), out, cfg)
    print("\n".join(str(f) for f in files))
    return 0


COMMANDS = {"validate": cmd_validate, "reach": cmd_reach, "report": cmd_report,
            **{name: cmd_run for name in MODE_OF}}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GameFormatError, InvalidGameError, ReportError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
