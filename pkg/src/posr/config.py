"""Experiment configuration, loadable from JSON and overridable field by field."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

MODES = ("full_info", "bandit_blocked", "ftrl_demo", "independent_transition")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str = "full_info"
    game: str | None = None          # game file; when unset the generator below is used
    players: int = 2
    horizon: int = 2
    states_per_layer: int = 2
    actions: int = 2
    seed: int = 0
    T: int = 1000
    eta: float | None = None
    gamma: float | None = None
    epsilon: float | None = None
    delta: float = 0.1
    block: int | None = None
    checkpoints: int = 32
    out: str = "out"
    normalization: str = "visits"

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {self.mode!r}")
        if self.T < 1:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.checkpoints < 1:
            raise ConfigError(f"checkpoints must be positive, got {self.checkpoints}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if self.normalization not in ("visits", "block"):
            raise ConfigError(f"normalization must be 'visits' or 'block', got {self.normalization!r}")
        if self.game is not None and self.mode in ("independent_transition", "ftrl_demo"):
            raise ConfigError(f"mode {self.mode} builds its own environment; drop the game file")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown config fields: {', '.join(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        data = self.to_dict()
        data.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig.from_dict(data)
