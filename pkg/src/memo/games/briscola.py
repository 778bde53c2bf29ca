"""Two-player Briscola with a 40-card Italian deck."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from memo.games.core import Game, chance_rng, register

SUITS = ("♠", "♥", "♦", "♣")
RANKS = ("A", "2", "3", "4", "5", "6", "7", "J", "Q", "K")
POINTS = {"A": 11, "3": 10, "K": 4, "Q": 3, "J": 2}
# strongest first
POWER_ORDER = ("A", "3", "K", "Q", "J", "7", "6", "5", "4", "2")
POWER = {rank: len(POWER_ORDER) - i for i, rank in enumerate(POWER_ORDER)}
HAND_SIZE = 3
TOTAL_POINTS = 120

Card = tuple[str, str]  # (rank, suit)

HEADER = """You are playing Briscola - Player {player}.
Goal: Win tricks and collect the most points (120 total points in the deck).
Card Points: A=11, 3=10, K=4, Q=3, J=2, others=0
Card Power: A > 3 > K > Q > J > 7 > 6 > 5 > 4 > 2
Trump cards beat non-trump cards regardless of power.

Action: '[play X]' where X is the position (1-3) of the card in your hand
"""


def card_points(card: Card) -> int:
    return POINTS.get(card[0], 0)


def card_str(card: Card) -> str:
    return f"{card[0]}{card[1]}"


def briscola_trick_winner(lead: Card, reply: Card, trump_suit: str) -> int:
    """0 if the leader takes the trick, 1 if the replier does."""
    lead_trump, reply_trump = lead[1] == trump_suit, reply[1] == trump_suit
    if lead_trump != reply_trump:
        return 1 if reply_trump else 0
    if lead[1] == reply[1]:
        return 1 if POWER[reply[0]] > POWER[lead[0]] else 0
    return 0


@dataclass(frozen=True)
class BriscolaState:
    deck: tuple[Card, ...]  # draw pile, face-up trump card last
    trump: Card
    hands: tuple[tuple[Card, ...], tuple[Card, ...]]
    leader: int = 0
    trick: tuple[Card, ...] = ()  # cards on the table, leader's first
    points: tuple[int, int] = (0, 0)
    tricks_played: int = 0
    last_trick: tuple = ()  # (leader, lead card, reply card, winner) of the previous trick
    game_id: str = "briscola"
    forfeited_by: int | None = None


class Briscola(Game):
    game_id = "briscola"
    title = "Briscola"

    def new_game(self, seed: int) -> BriscolaState:
        deck = [(rank, suit) for suit in SUITS for rank in RANKS]
        order = chance_rng(seed).permutation(len(deck))
        cards = [deck[i] for i in order]
        hand0 = tuple(cards[0:6:2])
        hand1 = tuple(cards[1:6:2])
        trump = cards[6]
        pile = tuple(cards[7:]) + (trump,)
        return BriscolaState(deck=pile, trump=trump, hands=(hand0, hand1))

    def to_move(self, state: BriscolaState) -> int:
        return (state.leader + len(state.trick)) % 2

    def finished(self, state: BriscolaState) -> bool:
        return not state.hands[0] and not state.hands[1] and not state.trick

    def legal_actions(self, state: BriscolaState) -> frozenset[str]:
        hand = state.hands[self.to_move(state)]
        return frozenset(f"[play {i}]" for i in range(1, len(hand) + 1))

    def apply(self, state: BriscolaState, action: str) -> BriscolaState:
        actor = self.to_move(state)
        pos = int(action.strip("[]").split()[1]) - 1
        hand = state.hands[actor]
        card = hand[pos]
        hands = list(state.hands)
        hands[actor] = hand[:pos] + hand[pos + 1:]
        trick = state.trick + (card,)
        if len(trick) < 2:
            return replace(state, hands=tuple(hands), trick=trick)

        rel = briscola_trick_winner(trick[0], trick[1], state.trump[1])
        winner = (state.leader + rel) % 2
        points = list(state.points)
        points[winner] += card_points(trick[0]) + card_points(trick[1])
        deck = state.deck
        if deck:
            hands[winner] = hands[winner] + (deck[0],)
            hands[1 - winner] = hands[1 - winner] + (deck[1],)
            deck = deck[2:]
        return replace(
            state,
            deck=deck,
            hands=tuple(hands),
            leader=winner,
            trick=(),
            points=tuple(points),
            tricks_played=state.tricks_played + 1,
            last_trick=(state.leader, trick[0], trick[1], winner),
        )

    def score(self, state: BriscolaState) -> int:
        diff = state.points[0] - state.points[1]
        return (diff > 0) - (diff < 0)

    def random_action(self, state: BriscolaState, rng: np.random.Generator) -> str:
        n = len(state.hands[self.to_move(state)])
        return f"[play {int(rng.integers(n)) + 1}]"

    def observe(self, state: BriscolaState, player: int) -> str:
        trump_suit = state.trump[1]
        lines = [HEADER.format(player=player)]
        lines.append(
            f" Briscola game started! Trump suit: {trump_suit} "
            f"(Trump card: {card_str(state.trump)})"
        )
        if state.last_trick:
            leader, lead, reply, winner = state.last_trick
            lines.append(
                f" Last trick: Player {leader} led {card_str(lead)}, Player {1 - leader} "
                f"answered {card_str(reply)}. Player {winner} won "
                f"{card_points(lead) + card_points(reply)} pts."
            )
        lines.append(" Your hand:")
        for i, card in enumerate(state.hands[player], start=1):
            tag = " (TRUMP)" if card[1] == trump_suit else ""
            lines.append(f"  {i}. {card_str(card)} [{card_points(card)} pts]{tag}")
        lines.append("")
        if state.trick:
            lines.append(
                f"Current trick: Player {state.leader} played {card_str(state.trick[0])} "
                f"[{card_points(state.trick[0])} pts]"
            )
        else:
            lines.append("No cards played yet this trick.")
        lines.append("")
        lines.append(f"Scores: Player 0: {state.points[0]} pts | Player 1: {state.points[1]} pts")
        lines.append(f"Trump suit: {trump_suit} | Cards left in deck: {len(state.deck)}")
        if not self.finished(state) and state.forfeited_by is None and self.to_move(state) == player:
            lines.append("")
            lines.append("Play a card using [play X]")
        return "\n".join(lines)


register(Briscola())
