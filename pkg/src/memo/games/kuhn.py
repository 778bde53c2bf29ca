"""Three-round Kuhn Poker."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from memo.games.core import Game, chance_rng, register

CARDS = "JQK"
ROUNDS = 3
STARTING_CHIPS = 10

CHECK, BET, CALL, FOLD = "[check]", "[bet]", "[call]", "[fold]"

# complete betting lines, written as moves from the first actor's point of view
TERMINAL_LINES = {
    ("check", "check"),
    ("bet", "call"),
    ("bet", "fold"),
    ("check", "bet", "call"),
    ("check", "bet", "fold"),
}

RULES = """You are Player {player} in a 3 round game of Kuhn Poker.
Game Rules:
- Kuhn Poker uses a 3-card deck with J, Q, K (J lowest, K highest)
- Each player antes 1 chip and receives 1 card each round (note that the cards are dealt without replacement, so you cannot have the same card as your opponent).
- Game continues for 3 rounds
- The player with the most chips after all rounds wins
Action Rules:
- '[check]': Pass without betting (only if no bet is on the table)
- '[bet]': Add 1 chip to the pot (only if no bet is on the table)
- '[call]': Match an opponent's bet by adding 1 chip to the pot
- '[fold]': Surrender your hand and let your opponent win the pot"""


@dataclass(frozen=True)
class KuhnState:
    deals: tuple[tuple[int, int], ...]  # (card of player 0, card of player 1) per round
    round: int = 0  # 0-based; == ROUNDS once the game is over
    chips: tuple[int, int] = (STARTING_CHIPS - 1, STARTING_CHIPS - 1)
    pot: int = 2
    history: tuple[str, ...] = ()
    past: tuple[tuple[str, ...], ...] = ()
    game_id: str = "kuhn_poker"
    forfeited_by: int | None = None


def first_actor(round_index: int) -> int:
    return round_index % 2


def kuhn_round_resolution(
    history: Sequence[str], cards: tuple[int, int], first: int = 0
) -> tuple[int, int]:
    """Net chip change for (player 0, player 1) over a complete betting line.

    ``history`` lists the moves without brackets in play order starting with
    ``first``; ``cards`` are ranks (0=J, 1=Q, 2=K). Antes are included.
    """
    line = tuple(history)
    if line not in TERMINAL_LINES:
        raise ValueError(f"malformed betting sequence {line!r}")
    actors = [(first + i) % 2 for i in range(len(line))]
    put_in = [1, 1]
    for actor, move in zip(actors, line):
        if move in ("bet", "call"):
            put_in[actor] += 1
    pot = sum(put_in)
    if line[-1] == "fold":
        winner = 1 - actors[-1]
    else:
        winner = 0 if cards[0] > cards[1] else 1
    return tuple(pot - put_in[p] if p == winner else -put_in[p] for p in (0, 1))


class KuhnPoker(Game):
    game_id = "kuhn_poker"
    title = "Kuhn Poker"

    def new_game(self, seed: int) -> KuhnState:
        rng = chance_rng(seed)
        deals = []
        for _ in range(ROUNDS):
            order = rng.permutation(3)
            deals.append((int(order[0]), int(order[1])))
        return KuhnState(deals=tuple(deals))

    def to_move(self, state: KuhnState) -> int:
        return (first_actor(state.round) + len(state.history)) % 2

    def finished(self, state: KuhnState) -> bool:
        return state.round >= ROUNDS

    def legal_actions(self, state: KuhnState) -> frozenset[str]:
        if state.history and state.history[-1] == "bet":
            return frozenset({FOLD, CALL})
        return frozenset({CHECK, BET})

    def apply(self, state: KuhnState, action: str) -> KuhnState:
        actor = self.to_move(state)
        move = action.strip("[]")
        chips = list(state.chips)
        pot = state.pot
        if move in ("bet", "call"):
            chips[actor] -= 1
            pot += 1
        history = state.history + (move,)
        if history not in TERMINAL_LINES:
            return replace(state, chips=tuple(chips), pot=pot, history=history)

        cards = state.deals[state.round]
        if move == "fold":
            winner = 1 - actor
        else:
            winner = 0 if cards[0] > cards[1] else 1
        chips[winner] += pot
        next_round = state.round + 1
        pot = 0
        if next_round < ROUNDS:
            chips = [c - 1 for c in chips]
            pot = 2
        return replace(
            state,
            round=next_round,
            chips=tuple(chips),
            pot=pot,
            history=(),
            past=state.past + (history,),
        )

    def score(self, state: KuhnState) -> int:
        diff = state.chips[0] - state.chips[1]
        return (diff > 0) - (diff < 0)

    def random_action(self, state: KuhnState, rng: np.random.Generator) -> str:
        options = sorted(self.legal_actions(state))
        return options[int(rng.integers(len(options)))]

    # ------------------------------------------------------------------ rendering

    def _round_lines(self, player: int, r: int, moves: Sequence[str], deal) -> list[str]:
        lines = [
            f"### Starting round {r + 1} out of {ROUNDS} rounds. "
            f"Your card is: '{CARDS[deal[player]]}'"
        ]
        for i, move in enumerate(moves):
            actor = (first_actor(r) + i) % 2
            lines.append(f"Player {actor}, submitted move: '[{move}]'.")
        return lines

    def observe(self, state: KuhnState, player: int) -> str:
        lines = [RULES.format(player=player)]
        for r, moves in enumerate(state.past):
            deal = state.deals[r]
            lines.extend(self._round_lines(player, r, moves, deal))
            if moves[-1] == "fold":
                folder = (first_actor(r) + len(moves) - 1) % 2
                lines.append(f"Player {folder} has folded. Player {1 - folder} wins the pot.")
            else:
                winner = 0 if deal[0] > deal[1] else 1
                lines.append(
                    f"Showdown: Player 0 has '{CARDS[deal[0]]}', Player 1 has "
                    f"'{CARDS[deal[1]]}'. Player {winner} wins the pot."
                )
        if self.finished(state) or state.forfeited_by is not None:
            lines.append(f"Final chips: Player 0: {state.chips[0]} | Player 1: {state.chips[1]}")
            return "\n".join(lines)
        lines.extend(
            self._round_lines(player, state.round, state.history, state.deals[state.round])
        )
        if player == self.to_move(state):
            order = [FOLD, CALL] if state.history and state.history[-1] == "bet" else [CHECK, BET]
            lines.append("Your available actions are: " + ", ".join(f"'{a}'" for a in order))
        return "\n".join(lines)


register(KuhnPoker())
