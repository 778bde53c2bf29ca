"""TwoDollar: alternate proposals to split $2.00, in integer cents."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from memo.games.core import Game, chance_rng, register, register_template

TOTAL_CENTS = 200
MAX_ROUNDS = 20

PROPOSE = "[Propose] $X.XX"
ACCEPT, REJECT = "[Accept]", "[Reject]"

_AMOUNT = re.compile(r"^\s*\$\s*(\d+)(?:\.(\d{1,2}))?")

# Role flavour only; outcomes are decided by the split.
SECRET_INSTRUCTIONS = (
    "Your budget this month is tight, so every cent matters to you. Argue for the "
    "largest share you can get, but a deal is better than no deal.",
    "You value a quick, friendly agreement. Still, try to keep more than half of "
    "the $2.00 if your counterpart seems willing.",
    "Your counterpart has had a difficult week. Be considerate in tone while still "
    "bargaining firmly for your share.",
    "You pride yourself on fairness and expect the same in return. Push back on "
    "lopsided offers and justify your own proposals.",
)

INTRO = """[GAME] TWO DOLLAR NEGOTIATION GAME
You are Player {player} negotiating with another player over how to split $2.00 total. There are 20 maximum rounds.
GAME RULES:
- You must reach an agreement on how to split the $2.00
- If no agreement is reached, both players get $0.00
- You have secret instructions that only you can see (below)
REQUIRED ACTION FORMAT:
Always provide your reasoning/persuasion BEFORE the bracketed action.
Any text after the bracketed action will be ignored.
Available actions:
- Make a proposal: "I think this is fair because... [Propose] $X.XX"
- Accept current proposal: "This works for me because... [Accept]"
- Reject current proposal: "I can't accept this because... [Reject]"
=== YOUR SECRET INSTRUCTIONS ===
{instructions}"""


def format_cents(cents: int) -> str:
    return f"${cents // 100}.{cents % 100:02d}"


def _propose_parser(inner: str, after: str) -> str | None:
    if inner.strip().lower() != "propose":
        return None
    m = _AMOUNT.match(after)
    if not m:
        return None
    cents = int(m.group(1)) * 100 + int((m.group(2) or "0").ljust(2, "0"))
    return f"[Propose] {format_cents(cents)}"


register_template(PROPOSE, _propose_parser)


def proposal_cents(token: str) -> int:
    dollars, cents = token.split("$", 1)[1].split(".")
    return int(dollars) * 100 + int(cents)


@dataclass(frozen=True)
class TwoDollarState:
    instructions: tuple[int, int]
    turn: int = 0  # two turns per round
    pending: tuple = ()  # (proposer, cents for proposer)
    shares: tuple = ()  # agreed (cents to player 0, cents to player 1)
    log: tuple[str, ...] = ()
    game_id: str = "two_dollar"
    forfeited_by: int | None = None

    @property
    def round(self) -> int:
        return self.turn // 2 + 1


def twodollar_settlement(state: TwoDollarState) -> int:
    """Larger agreed share wins; an even split or no deal is a draw."""
    if not state.shares:
        return 0
    diff = state.shares[0] - state.shares[1]
    return (diff > 0) - (diff < 0)


class TwoDollar(Game):
    game_id = "two_dollar"
    title = "TwoDollar"

    def new_game(self, seed: int) -> TwoDollarState:
        picks = chance_rng(seed).choice(len(SECRET_INSTRUCTIONS), size=2, replace=False)
        return TwoDollarState(instructions=(int(picks[0]), int(picks[1])))

    def to_move(self, state: TwoDollarState) -> int:
        return state.turn % 2

    def finished(self, state: TwoDollarState) -> bool:
        return bool(state.shares) or state.turn >= 2 * MAX_ROUNDS

    def legal_actions(self, state: TwoDollarState) -> frozenset[str]:
        if state.pending:
            return frozenset({PROPOSE, ACCEPT, REJECT})
        return frozenset({PROPOSE})

    def accepts(self, state: TwoDollarState, action: str) -> bool:
        if action.startswith("[Propose]"):
            return 0 <= proposal_cents(action) <= TOTAL_CENTS
        return action in self.legal_actions(state)

    def apply(self, state: TwoDollarState, action: str) -> TwoDollarState:
        actor = self.to_move(state)
        turn = state.turn + 1
        if action == ACCEPT:
            proposer, cents = state.pending
            shares = [0, 0]
            shares[proposer] = cents
            shares[1 - proposer] = TOTAL_CENTS - cents
            note = (
                f"Player {actor} accepted. Final split: Player 0 gets "
                f"{format_cents(shares[0])}, Player 1 gets {format_cents(shares[1])}."
            )
            return replace(state, turn=turn, pending=(), shares=tuple(shares), log=state.log + (note,))
        if action == REJECT:
            note = f"Player {actor} rejected the proposal."
            return replace(state, turn=turn, pending=(), log=state.log + (note,))
        cents = proposal_cents(action)
        note = (
            f"Player {actor} proposed: {format_cents(cents)} for Player {actor}, "
            f"{format_cents(TOTAL_CENTS - cents)} for Player {1 - actor}."
        )
        return replace(state, turn=turn, pending=(actor, cents), log=state.log + (note,))

    def score(self, state: TwoDollarState) -> int:
        return twodollar_settlement(state)

    def random_action(self, state: TwoDollarState, rng: np.random.Generator) -> str:
        options = sorted(self.legal_actions(state))
        choice = options[int(rng.integers(len(options)))]
        if choice == PROPOSE:
            return f"[Propose] {format_cents(int(rng.integers(TOTAL_CENTS + 1)))}"
        return choice

    def observe(self, state: TwoDollarState, player: int) -> str:
        lines = [
            INTRO.format(player=player, instructions=SECRET_INSTRUCTIONS[state.instructions[player]])
        ]
        for i, note in enumerate(state.log):
            if i % 2 == 0:
                lines.append(f"[GAME] === ROUND {i // 2 + 1} of {MAX_ROUNDS} ===")
            lines.append(note)
        if self.finished(state) or state.forfeited_by is not None:
            if not state.shares:
                lines.append("No agreement was reached. Both players get $0.00.")
            return "\n".join(lines)
        if state.turn % 2 == 0:
            lines.append(f"[GAME] === ROUND {state.round} of {MAX_ROUNDS} ===")
        if state.pending and player == self.to_move(state):
            proposer, cents = state.pending
            lines.append(
                f"Current proposal from Player {proposer}: {format_cents(cents)} for them, "
                f"{format_cents(TOTAL_CENTS - cents)} for you."
            )
        return "\n".join(lines)


register(TwoDollar())
