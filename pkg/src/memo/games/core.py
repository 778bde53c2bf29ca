"""Two-player turn-based game contract, trajectory records, and action extraction.

Game states are frozen dataclasses. A :class:`Game` implements the rules for one
environment and is registered under a stable id; the module-level functions
(:func:`new_game`, :func:`step`, :func:`legal_actions`, ...) dispatch on the
``game_id`` carried by every state.
"""

from __future__ import annotations

import abc
import dataclasses
import hashlib
import json
import re
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np

PLAYERS = (0, 1)

WIN, DRAW, LOSS = 1, 0, -1


class GameError(Exception):
    """Raised on contract violations: acting out of turn, stepping a finished game."""


class UnknownGameError(KeyError):
    pass


class DigestMismatchError(RuntimeError):
    """A resumed prefix did not reproduce its recorded state."""


def opponent(player: int) -> int:
    if player not in PLAYERS:
        raise ValueError(f"player must be 0 or 1, got {player!r}")
    return 1 - player


def chance_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by the game seed.

    Every chance event a game needs is drawn from this stream inside ``new_game``,
    so replays never depend on how players' turns interleave.
    """
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def stable_hash(payload: Any) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


# --------------------------------------------------------------------------- records


@dataclass(frozen=True)
class ActionRecord:
    actor: int
    raw_response: str
    extracted: str | None
    valid: bool

    def __post_init__(self) -> None:
        if self.valid and self.extracted is None:
            raise ValueError("a valid record must carry an extracted action")

    def to_dict(self) -> dict:
        return {
            "actor": self.actor,
            "raw_response": self.raw_response,
            "extracted": self.extracted,
            "valid": self.valid,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ActionRecord:
        return cls(data["actor"], data["raw_response"], data["extracted"], data["valid"])


@dataclass(frozen=True)
class Step:
    observation: str
    record: ActionRecord
    digest: str  # digest of the state reached after this step


@dataclass(frozen=True)
class TrajectoryPrefix:
    game_id: str
    seed: int
    steps: tuple[ActionRecord, ...]
    state_digest: str

    @property
    def key(self) -> str:
        """Identity used by the replay buffer: game, seed and the extracted moves."""
        return stable_hash([self.game_id, self.seed, [r.extracted for r in self.steps]])

    def __len__(self) -> int:
        return len(self.steps)


@dataclass
class Trajectory:
    game_id: str
    seed: int
    steps: list[Step] = field(default_factory=list)
    outcome: int | None = None

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def records(self) -> list[ActionRecord]:
        return [s.record for s in self.steps]

    def prefix(self, k: int) -> TrajectoryPrefix:
        if not 0 <= k <= self.horizon:
            raise ValueError(f"prefix length {k} outside 0..{self.horizon}")
        if k == 0:
            digest = state_digest(new_game(self.game_id, self.seed))
        else:
            digest = self.steps[k - 1].digest
        return TrajectoryPrefix(
            self.game_id, self.seed, tuple(s.record for s in self.steps[:k]), digest
        )

    def to_dict(self) -> dict:
        return {
            "game_id": self.game_id,
            "seed": self.seed,
            "steps": [
                {"observation": s.observation, **s.record.to_dict(), "digest": s.digest}
                for s in self.steps
            ],
            "outcome": self.outcome,
            "horizon": self.horizon,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> Trajectory:
        steps = [
            Step(s["observation"], ActionRecord.from_dict(s), s["digest"]) for s in data["steps"]
        ]
        return cls(data["game_id"], data["seed"], steps, data["outcome"])


def write_trajectories(path, trajectories: Iterable[Trajectory]) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(traj.to_json() + "\n")


def read_trajectories(path) -> list[Trajectory]:
    with open(path, encoding="utf-8") as fh:
        return [Trajectory.from_dict(json.loads(line)) for line in fh if line.strip()]


# --------------------------------------------------------------------- action parsing

# Parameterized action templates. A game lists the template string in its legal set;
# the parser canonicalizes a concrete token (or returns None if it is malformed).
# Parsers receive the bracket contents and the text following the closing bracket.
TemplateParser = Callable[[str, str], "str | None"]
TEMPLATES: dict[str, TemplateParser] = {}

_BRACKET = re.compile(r"\[([^\[\]]*)\]")


def register_template(template: str, parser: TemplateParser) -> None:
    TEMPLATES[template] = parser


def _norm(text: str) -> str:
    return " ".join(text.split()).lower()


def extract_action(raw: str, legal: Iterable[str]) -> str | None:
    """Return the last bracketed token in ``raw`` that matches a legal action.

    Keyword tokens match case-insensitively; template tokens (see
    :data:`TEMPLATES`) match structurally and are returned in canonical form.
    """
    legal = list(legal)
    if not legal:
        raise ValueError("legal action set is empty")
    keywords = {_norm(tok): tok for tok in legal if tok not in TEMPLATES}
    templates = [TEMPLATES[tok] for tok in legal if tok in TEMPLATES]
    for match in reversed(list(_BRACKET.finditer(raw or ""))):
        hit = keywords.get(_norm(match.group(0)))
        if hit is not None:
            return hit
        for parser in templates:
            canonical = parser(match.group(1), raw[match.end():])
            if canonical is not None:
                return canonical
    return None


# ------------------------------------------------------------------------ game contract


class Game(abc.ABC):
    """Rules of one environment. States are immutable; ``apply`` returns a new state."""

    game_id: ClassVar[str]
    title: ClassVar[str]

    @abc.abstractmethod
    def new_game(self, seed: int) -> Any: ...

    @abc.abstractmethod
    def to_move(self, state) -> int: ...

    @abc.abstractmethod
    def finished(self, state) -> bool:
        """True when the rules (not a forfeit) have ended the game."""

    @abc.abstractmethod
    def legal_actions(self, state) -> frozenset[str]: ...

    @abc.abstractmethod
    def apply(self, state, action: str) -> Any:
        """Apply a validated action."""

    @abc.abstractmethod
    def observe(self, state, player: int) -> str: ...

    @abc.abstractmethod
    def score(self, state) -> int:
        """Payoff to Player 0 for a state the rules have finished."""

    @abc.abstractmethod
    def random_action(self, state, rng: np.random.Generator) -> str:
        """A uniformly chosen concrete legal action (templates instantiated)."""

    def accepts(self, state, action: str) -> bool:
        """Whether a token extracted against the legal set is playable here."""
        return action in self.legal_actions(state)

    def default_action(self, state) -> str | None:
        """Action taken when a response carries no legal token; None means forfeit."""
        return None


GAMES: dict[str, Game] = {}


def register(game: Game) -> Game:
    GAMES[game.game_id] = game
    return game


def get_game(game_id: str) -> Game:
    try:
        return GAMES[game_id]
    except KeyError:
        raise UnknownGameError(f"unknown game id {game_id!r}; known: {sorted(GAMES)}") from None


def _game_of(state) -> Game:
    return get_game(state.game_id)


def new_game(game_id: str, seed: int):
    return get_game(game_id).new_game(seed)


def is_terminal(state) -> bool:
    return state.forfeited_by is not None or _game_of(state).finished(state)


def to_move(state) -> int:
    return _game_of(state).to_move(state)


def legal_actions(state, player: int | None = None) -> frozenset[str]:
    if is_terminal(state):
        raise GameError("no legal actions in a terminal state")
    game = _game_of(state)
    if player is not None and player != game.to_move(state):
        raise GameError(f"player {player} is not to act")
    return game.legal_actions(state)


def observe(state, player: int) -> str:
    return _game_of(state).observe(state, player)


def outcome(state) -> int:
    """Payoff to Player 0 in {-1, 0, +1}."""
    if state.forfeited_by is not None:
        return LOSS if state.forfeited_by == 0 else WIN
    game = _game_of(state)
    if not game.finished(state):
        raise GameError("outcome requested for a non-terminal state")
    return game.score(state)


def make_record(state, raw: str) -> ActionRecord:
    """Parse a model response into an :class:`ActionRecord` for the player to act."""
    game = _game_of(state)
    actor = game.to_move(state)
    token = extract_action(raw, legal_actions(state))
    if token is None:
        token = game.default_action(state)
    valid = token is not None and game.accepts(state, token)
    return ActionRecord(actor, raw, token, valid)


def step(state, record: ActionRecord):
    if is_terminal(state):
        raise GameError("cannot step a terminal state")
    game = _game_of(state)
    if record.actor != game.to_move(state):
        raise GameError(f"player {record.actor} acted out of turn")
    if record.valid:
        if not game.accepts(state, record.extracted):
            raise GameError(f"record marked valid but {record.extracted!r} is not playable")
        return game.apply(state, record.extracted)
    # invalid response: the actor forfeits
    return dataclasses.replace(state, forfeited_by=record.actor)


def state_digest(state) -> str:
    """Stable 64-bit digest of the full state; never used by game logic."""
    return stable_hash(dataclasses.asdict(state))


def replay_records(game_id: str, seed: int, records: Sequence[ActionRecord]):
    state = new_game(game_id, seed)
    for record in records:
        state = step(state, record)
    return state


def resume(prefix: TrajectoryPrefix):
    """Rebuild the state a prefix reached, checking it against the stored digest."""
    state = replay_records(prefix.game_id, prefix.seed, prefix.steps)
    got = state_digest(state)
    if got != prefix.state_digest:
        raise DigestMismatchError(
            f"{prefix.game_id} seed={prefix.seed}: resumed digest {got} != {prefix.state_digest}"
        )
    return state


def random_playout(game_id: str, seed: int, rng: np.random.Generator) -> Trajectory:
    """Play a game with uniformly random legal actions (used for fuzzing)."""
    game = get_game(game_id)
    state = game.new_game(seed)
    traj = Trajectory(game_id, seed)
    while not is_terminal(state):
        obs = game.observe(state, game.to_move(state))
        record = make_record(state, game.random_action(state, rng))
        state = step(state, record)
        traj.steps.append(Step(obs, record, state_digest(state)))
    traj.outcome = outcome(state)
    return traj
