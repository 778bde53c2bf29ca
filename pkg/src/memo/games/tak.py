"""SimpleTak: stone placement on a 4x4 board, first edge-to-edge path wins."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from memo.games.core import Game, register

SIZE = 4
CELLS = SIZE * SIZE
MARKS = ("O", "X")

INTRO = """You are Player {player} in SimpleTak.
On the board, your stones appear as '{own}' and your opponent's stones appear as '{other}'.

On your turn, choose one empty cell (by its numbered index) and place your stone there.
For example, '[12]' places your stone in cell 12.

Your objective is to form a continuous path of your stones that connects two opposite edges of the board (top-to-bottom or left-to-right).
"""


def _neighbours(cell: int):
    r, c = divmod(cell, SIZE)
    if r > 0:
        yield cell - SIZE
    if r < SIZE - 1:
        yield cell + SIZE
    if c > 0:
        yield cell - 1
    if c < SIZE - 1:
        yield cell + 1


def _reaches(grid: Sequence[str], mark: str, starts, goal) -> bool:
    frontier = [s for s in starts if grid[s] == mark]
    seen = set(frontier)
    while frontier:
        cell = frontier.pop()
        if goal(cell):
            return True
        for nb in _neighbours(cell):
            if nb not in seen and grid[nb] == mark:
                seen.add(nb)
                frontier.append(nb)
    return False


def tak_connection(grid: Sequence[str], mark: str) -> bool:
    """Orthogonally connected path of ``mark`` from row 0 to row 3 or column 0 to column 3."""
    top_bottom = _reaches(grid, mark, range(SIZE), lambda c: c // SIZE == SIZE - 1)
    return top_bottom or _reaches(
        grid, mark, range(0, CELLS, SIZE), lambda c: c % SIZE == SIZE - 1
    )


@dataclass(frozen=True)
class TakState:
    grid: tuple[str, ...] = ("",) * CELLS
    moves: int = 0
    winner: int | None = None
    game_id: str = "simpletak"
    forfeited_by: int | None = None


def render_board(grid: Sequence[str]) -> str:
    rule = "+----" * SIZE + "+"
    rows = [rule]
    for r in range(SIZE):
        cells = []
        for c in range(SIZE):
            i = r * SIZE + c
            cells.append(" " + (grid[i] or str(i)).ljust(2) + " ")
        rows.append("|" + "|".join(cells) + "|")
        rows.append(rule)
    return "\n".join(rows)


class SimpleTak(Game):
    game_id = "simpletak"
    title = "SimpleTak"

    def new_game(self, seed: int) -> TakState:
        return TakState()

    def to_move(self, state: TakState) -> int:
        return state.moves % 2

    def finished(self, state: TakState) -> bool:
        return state.winner is not None or state.moves == CELLS

    def legal_actions(self, state: TakState) -> frozenset[str]:
        return frozenset(f"[{i}]" for i, v in enumerate(state.grid) if not v)

    def apply(self, state: TakState, action: str) -> TakState:
        actor = self.to_move(state)
        cell = int(action.strip("[]"))
        grid = list(state.grid)
        grid[cell] = MARKS[actor]
        winner = actor if tak_connection(grid, MARKS[actor]) else None
        return replace(state, grid=tuple(grid), moves=state.moves + 1, winner=winner)

    def score(self, state: TakState) -> int:
        if state.winner is None:
            return 0
        return 1 if state.winner == 0 else -1

    def random_action(self, state: TakState, rng: np.random.Generator) -> str:
        empty = [i for i, v in enumerate(state.grid) if not v]
        return f"[{empty[int(rng.integers(len(empty)))]}]"

    def observe(self, state: TakState, player: int) -> str:
        text = INTRO.format(player=player, own=MARKS[player], other=MARKS[1 - player])
        text += "\n\nCurrent Board:\n\n" + render_board(state.grid)
        if not self.finished(state) and state.forfeited_by is None:
            moves = ", ".join(f"[{i}]" for i, v in enumerate(state.grid) if not v)
            text += "\nAvailable Moves: " + moves
        return text


register(SimpleTak())
