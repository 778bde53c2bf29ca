"""Game environments. Importing this package registers all five games."""

from memo.games import briscola, kuhn, negotiation, tak, two_dollar  # noqa: F401
from memo.games.core import (
    GAMES,
    ActionRecord,
    DigestMismatchError,
    Game,
    GameError,
    Step,
    Trajectory,
    TrajectoryPrefix,
    UnknownGameError,
    extract_action,
    get_game,
    is_terminal,
    legal_actions,
    make_record,
    new_game,
    observe,
    opponent,
    outcome,
    random_playout,
    read_trajectories,
    replay_records,
    resume,
    state_digest,
    step,
    to_move,
    write_trajectories,
)

GAME_IDS = ("kuhn_poker", "briscola", "simpletak", "simple_negotiation", "two_dollar")

__all__ = [
    "GAMES",
    "GAME_IDS",
    "ActionRecord",
    "DigestMismatchError",
    "Game",
    "GameError",
    "Step",
    "Trajectory",
    "TrajectoryPrefix",
    "UnknownGameError",
    "extract_action",
    "get_game",
    "is_terminal",
    "legal_actions",
    "make_record",
    "new_game",
    "observe",
    "opponent",
    "outcome",
    "random_playout",
    "read_trajectories",
    "replay_records",
    "resume",
    "state_digest",
    "step",
    "to_move",
    "write_trajectories",
]
