"""JSON game files.

Layout::

    {
      "horizon": 2,
      "layers": [[0], [1, 2], [3]],
      "action_counts": [2, 2],
      "transition": [{"state": 0, "joint_action": [0, 1],
                      "next_state_probs": {"1": 0.4, "2": 0.6}}, ...],
      "losses": [[{"state": 0, "joint_action": [0, 1], "value": 0.25}, ...],  # player 0
                 [...]]                                                       # player 1
    }

Every (non-terminal state, joint action) pair needs a transition record and a
loss record for each player; a missing record is an error rather than an
implicit zero.  Floats are written with ``repr`` so a round trip is exact.
"""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np

from .game import MarkovGame


class GameFormatError(ValueError):
    pass


def game_to_dict(game: MarkovGame) -> dict:
    joint = list(itertools.product(*(range(a) for a in game.action_counts)))
    transition = []
    losses = [[] for _ in range(game.n_players)]
    for layer in game.layers[:-1]:
        for s in layer:
            for ja in joint:
                row = game.transition[(s, *ja)]
                probs = {str(int(s2)): float(row[s2]) for s2 in np.flatnonzero(row)}
                transition.append({"state": int(s), "joint_action": list(ja),
                                   "next_state_probs": probs})
                for i in range(game.n_players):
                    losses[i].append({"state": int(s), "joint_action": list(ja),
                                      "value": float(game.losses[(i, s, *ja)])})
    return {
        "horizon": int(game.horizon),
        "layers": [[int(s) for s in layer] for layer in game.layers],
        "action_counts": list(game.action_counts),
        "transition": transition,
        "losses": losses,
    }


def game_from_dict(data: dict) -> MarkovGame:
    try:
        horizon = int(data["horizon"])
        layers = [[int(s) for s in layer] for layer in data["layers"]]
        action_counts = tuple(int(a) for a in data["action_counts"])
        t_records = data["transition"]
        l_records = data["losses"]
    except (KeyError, TypeError) as exc:
        raise GameFormatError(f"malformed game document: {exc!r}") from exc

    N = sum(len(layer) for layer in layers)
    m = len(action_counts)
    if len(l_records) != m:
        raise GameFormatError(f"losses given for {len(l_records)} players, expected {m}")
    transition = np.zeros((N, *action_counts, N))
    losses = np.zeros((m, N, *action_counts))
    have_t = set()
    have_l = set()

    def key(rec):
        s = int(rec["state"])
        ja = tuple(int(a) for a in rec["joint_action"])
        if len(ja) != m or not (0 <= s < N) or any(not 0 <= a < A for a, A in zip(ja, action_counts)):
            raise GameFormatError(f"record out of range: {rec}")
        return s, ja

    for rec in t_records:
        s, ja = key(rec)
        if (s, ja) in have_t:
            raise GameFormatError(f"duplicate transition record for state {s}, joint action {list(ja)}")
        have_t.add((s, ja))
        for s2, p in rec["next_state_probs"].items():
            s2 = int(s2)
            if not 0 <= s2 < N:
                raise GameFormatError(f"next state {s2} out of range in {rec}")
            transition[(s, *ja, s2)] = float(p)
    for i, records in enumerate(l_records):
        for rec in records:
            s, ja = key(rec)
            if (i, s, ja) in have_l:
                raise GameFormatError(
                    f"duplicate loss record for player {i}, state {s}, joint action {list(ja)}")
            have_l.add((i, s, ja))
            losses[(i, s, *ja)] = float(rec["value"])

    joint = list(itertools.product(*(range(a) for a in action_counts)))
    for layer in layers[:-1]:
        for s in layer:
            for ja in joint:
                if (s, ja) not in have_t:
                    raise GameFormatError(
                        f"missing transition record for state {s}, joint action {list(ja)}")
                for i in range(m):
                    if (i, s, ja) not in have_l:
                        raise GameFormatError(
                            f"missing loss record for player {i}, state {s}, joint action {list(ja)}")
    return MarkovGame(horizon, layers, action_counts, transition, losses)


def dumps_game(game: MarkovGame) -> str:
    return json.dumps(game_to_dict(game), indent=1, sort_keys=True) + "\n"


def save_game(game: MarkovGame, path) -> None:
    Path(path).write_text(dumps_game(game))


def load_game(path) -> MarkovGame:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{path}: not valid JSON ({exc})") from exc
    return game_from_dict(data)
