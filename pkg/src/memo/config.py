"""Run configuration: a flat key-value document mirroring :class:`RunConfig`."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from memo.games import GAME_IDS


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists one message per offending field."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


BACKEND_KINDS = ("scripted", "http")


@dataclass
class RunConfig:
    game_id: str = "kuhn_poker"
    population_size: int = 8
    generations: int = 5
    games_per_candidate: int = 50
    kappa: float = 1.0
    memory_fraction: float = 0.75
    random_ratio: float = 0.5
    replay_capacity: int = 100_000
    replay_alpha: float = 0.6
    replay_beta: float = 0.4
    memory_subset: int = 10
    proposal_lessons: int = 3
    reflection_states: int = 8
    length_budget: int = 1200
    seed: int = 0
    parallelism: int = 1
    invalid_retries: int = 0
    league: bool = False
    skip_draws: bool = False
    draw_probability: float = 0.10
    eval_games: int = 50
    eval_runs: int = 3
    agent_backend: str = "scripted"
    agent_policy: str = "random"
    agent_endpoint: str = ""
    agent_model: str = ""
    baseline_backend: str = "scripted"
    baseline_policy: str = "random"
    baseline_endpoint: str = ""
    baseline_model: str = ""
    optimizer_backend: str = "scripted"
    optimizer_policy: str = "echo"
    optimizer_endpoint: str = ""
    optimizer_model: str = ""
    planted_insight: str = ""

    @property
    def budget(self) -> int:
        """Tournament games over the whole run."""
        return self.population_size * self.generations * self.games_per_candidate

    def validate(self) -> RunConfig:
        problems = []

        def need(ok: bool, name: str, why: str) -> None:
            if not ok:
                problems.append(f"{name}: {why} (got {getattr(self, name)!r})")

        need(self.game_id in GAME_IDS, "game_id", f"must be one of {', '.join(GAME_IDS)}")
        for name in ("population_size", "generations", "games_per_candidate", "replay_capacity",
                     "parallelism", "length_budget", "eval_games", "eval_runs"):
            need(getattr(self, name) >= 1, name, "must be >= 1")
        for name in ("memory_subset", "proposal_lessons", "reflection_states", "invalid_retries"):
            need(getattr(self, name) >= 0, name, "must be >= 0")
        for name in ("memory_fraction", "random_ratio", "replay_beta"):
            need(0 <= getattr(self, name) <= 1, name, "must lie in [0, 1]")
        need(0 <= self.draw_probability < 1, "draw_probability", "must lie in [0, 1)")
        need(self.kappa >= 0, "kappa", "must be >= 0")
        need(self.replay_alpha >= 0, "replay_alpha", "must be >= 0")
        need(0 <= self.seed < 2**63, "seed", "must lie in [0, 2**63)")
        for role in ("agent", "baseline", "optimizer"):
            kind = getattr(self, f"{role}_backend")
            need(kind in BACKEND_KINDS, f"{role}_backend", f"must be one of {', '.join(BACKEND_KINDS)}")
            if kind == "http":
                need(bool(getattr(self, f"{role}_endpoint")), f"{role}_endpoint", "required for http")
                need(bool(getattr(self, f"{role}_model")), f"{role}_model", "required for http")
        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name: str, value):
    kind = type(getattr(RunConfig(), name))
    if kind is bool:
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if kind is int:
        if isinstance(value, bool):
            raise ValueError(f"not an integer: {value!r}")
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"not an integer: {value!r}")
        return int(value)
    if kind is float:
        return float(value)
    return "" if value is None else str(value)


def from_mapping(data: dict, overrides: dict | None = None) -> RunConfig:
    """Build a validated config; unknown keys and bad values are reported per field."""
    merged = dict(data or {})
    merged.update(overrides or {})
    problems, values = [], {}
    for key, value in merged.items():
        if key not in _FIELDS:
            problems.append(f"{key}: unknown configuration key")
            continue
        try:
            values[key] = _coerce(key, value)
        except (TypeError, ValueError) as exc:
            problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    return RunConfig(**values).validate()


def parse_overrides(items) -> dict:
    """``["key=value", ...]`` to a dict; values are read as YAML scalars."""
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError([f"{item}: override must look like key=value"])
        out[key.strip()] = yaml.safe_load(value) if value.strip() else ""
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError([f"{path}: expected a key-value document"])
    return from_mapping(data, overrides)
