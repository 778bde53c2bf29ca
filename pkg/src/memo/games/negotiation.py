"""SimpleNegotiation: barter five resources under private valuations."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from memo.games.core import Game, chance_rng, register, register_template

RESOURCES = ("Wheat", "Wood", "Sheep", "Brick", "Ore")
MAX_TURNS = 10
VALUE_RANGE = (5, 40)
QTY_RANGE = (5, 25)

OFFER = "[Offer: ...]"
ACCEPT, DENY = "[Accept]", "[Deny]"

Bundle = tuple[int, ...]  # quantity per resource, in RESOURCES order

INTRO = """You are Player {player} in the Negotiation Game.
You have some resources, and your task is to trade such that the total value of your resources increases.
The resources and associated values you currently have are:
{table}
At each turn, you can talk to your opponent and make a trade offer.
Use the following special tokens for actions:
  - '[Offer: 3 Sheep, 2 Ore -> 5 Brick, 2 Sheep]': [Offer: Offered Resources -> Requested Resources]
  - '[Accept]': To accept an incoming offer.
  - '[Deny]': To deny an incoming offer (default).
The game lasts for 10 turns in total."""

_ITEM = re.compile(r"^\s*(\d+)\s+([A-Za-z]+)\s*$")
_LOOKUP = {name.lower(): i for i, name in enumerate(RESOURCES)}


def parse_bundle(text: str) -> Bundle | None:
    qty = [0] * len(RESOURCES)
    for part in text.split(","):
        m = _ITEM.match(part)
        if not m or m.group(2).lower() not in _LOOKUP or int(m.group(1)) <= 0:
            return None
        qty[_LOOKUP[m.group(2).lower()]] += int(m.group(1))
    return tuple(qty)


def format_bundle(bundle: Bundle) -> str:
    return ", ".join(f"{q} {name}" for q, name in zip(bundle, RESOURCES) if q)


def format_offer(give: Bundle, take: Bundle) -> str:
    return f"[Offer: {format_bundle(give)} -> {format_bundle(take)}]"


def parse_offer(token: str) -> tuple[Bundle, Bundle]:
    inner = token[1:-1].split(":", 1)[1]
    give, take = inner.split("->")
    return parse_bundle(give), parse_bundle(take)


def _offer_parser(inner: str, _after: str) -> str | None:
    head, sep, body = inner.partition(":")
    if not sep or head.strip().lower() != "offer" or body.count("->") != 1:
        return None
    give, take = (parse_bundle(part) for part in body.split("->"))
    if give is None or take is None:
        return None
    return format_offer(give, take)


register_template(OFFER, _offer_parser)


def holds(inventory: Bundle, bundle: Bundle) -> bool:
    return all(have >= need for have, need in zip(inventory, bundle))


def portfolio_value(inventory: Bundle, values: Bundle) -> int:
    return sum(q * v for q, v in zip(inventory, values))


@dataclass(frozen=True)
class NegotiationState:
    inventories: tuple[Bundle, Bundle]
    values: tuple[Bundle, Bundle]
    initial: tuple[Bundle, Bundle]
    turn: int = 0
    pending: tuple = ()  # (offerer, give, take) or empty
    idle_streak: int = 0
    log: tuple[str, ...] = ()
    game_id: str = "simple_negotiation"
    forfeited_by: int | None = None


def negotiation_settlement(state: NegotiationState) -> int:
    """Compare each player's portfolio gain at their own valuations."""
    gains = [
        portfolio_value(state.inventories[p], state.values[p])
        - portfolio_value(state.initial[p], state.values[p])
        for p in (0, 1)
    ]
    diff = gains[0] - gains[1]
    return (diff > 0) - (diff < 0)


class SimpleNegotiation(Game):
    game_id = "simple_negotiation"
    title = "SimpleNegotiation"

    def new_game(self, seed: int) -> NegotiationState:
        rng = chance_rng(seed)
        k = len(RESOURCES)
        values = tuple(
            tuple(int(v) for v in rng.integers(VALUE_RANGE[0], VALUE_RANGE[1] + 1, size=k))
            for _ in range(2)
        )
        qty = tuple(
            tuple(int(q) for q in rng.integers(QTY_RANGE[0], QTY_RANGE[1] + 1, size=k))
            for _ in range(2)
        )
        return NegotiationState(inventories=qty, values=values, initial=qty)

    def to_move(self, state: NegotiationState) -> int:
        return state.turn % 2

    def finished(self, state: NegotiationState) -> bool:
        return state.turn >= MAX_TURNS or state.idle_streak >= 2

    def _can_accept(self, state: NegotiationState) -> bool:
        if not state.pending:
            return False
        offerer, give, take = state.pending
        return holds(state.inventories[offerer], give) and holds(
            state.inventories[1 - offerer], take
        )

    def legal_actions(self, state: NegotiationState) -> frozenset[str]:
        actions = {OFFER, DENY}
        if self._can_accept(state):
            actions.add(ACCEPT)
        return frozenset(actions)

    def accepts(self, state: NegotiationState, action: str) -> bool:
        if action == ACCEPT:
            return self._can_accept(state)
        if action == DENY:
            return True
        if action.startswith("[Offer:"):
            give, take = parse_offer(action)
            actor = self.to_move(state)
            return holds(state.inventories[actor], give) and any(take)
        return False

    def default_action(self, state: NegotiationState) -> str:
        return DENY

    def apply(self, state: NegotiationState, action: str) -> NegotiationState:
        actor = self.to_move(state)
        turn = state.turn + 1
        if action == ACCEPT:
            offerer, give, take = state.pending
            inv = [list(state.inventories[0]), list(state.inventories[1])]
            for i in range(len(RESOURCES)):
                inv[offerer][i] += take[i] - give[i]
                inv[actor][i] += give[i] - take[i]
            return replace(
                state,
                inventories=(tuple(inv[0]), tuple(inv[1])),
                turn=turn,
                pending=(),
                idle_streak=0,
                log=state.log + (f"Player {actor} accepted the offer from Player {offerer}.",),
            )
        if action == DENY:
            if state.pending:
                note = f"Player {actor} denied the offer from Player {state.pending[0]}."
                idle = 0
            else:
                note = f"Player {actor} made no offer."
                idle = state.idle_streak + 1
            return replace(state, turn=turn, pending=(), idle_streak=idle, log=state.log + (note,))
        give, take = parse_offer(action)
        return replace(
            state,
            turn=turn,
            pending=(actor, give, take),
            idle_streak=0,
            log=state.log + (f"Player {actor} offered: {format_offer(give, take)}",),
        )

    def score(self, state: NegotiationState) -> int:
        return negotiation_settlement(state)

    def random_action(self, state: NegotiationState, rng: np.random.Generator) -> str:
        options = sorted(self.legal_actions(state))
        choice = options[int(rng.integers(len(options)))]
        if choice != OFFER:
            return choice
        actor = self.to_move(state)
        owned = [i for i, q in enumerate(state.inventories[actor]) if q > 0]
        give = [0] * len(RESOURCES)
        take = [0] * len(RESOURCES)
        g = owned[int(rng.integers(len(owned)))]
        give[g] = int(rng.integers(1, min(3, state.inventories[actor][g]) + 1))
        t = int(rng.integers(len(RESOURCES)))
        take[t] = int(rng.integers(1, 4))
        return format_offer(tuple(give), tuple(take))

    def observe(self, state: NegotiationState, player: int) -> str:
        rows = []
        for name, q, v in zip(RESOURCES, state.inventories[player], state.values[player]):
            rows.append(f"        + {('[' + name + ']').ljust(10)}{('Qty: ' + str(q)).ljust(10)}Value: {v}")
        lines = [INTRO.format(player=player, table="\n".join(rows))]
        lines.extend(state.log)
        if self.finished(state) or state.forfeited_by is not None:
            lines.append("The game has ended.")
            return "\n".join(lines)
        lines.append(f"Turn {state.turn + 1} of {MAX_TURNS}.")
        if player == self.to_move(state):
            if state.pending:
                offerer, give, take = state.pending
                lines.append(
                    f"Pending offer from Player {offerer}: {format_offer(give, take)} "
                    f"(they give {format_bundle(give)}; you give {format_bundle(take)})"
                )
                lines.append("Respond with '[Accept]' or '[Deny]', or make a counter offer.")
            else:
                lines.append("Make a trade offer with '[Offer: ... -> ...]', or '[Deny]' to pass.")
        return "\n".join(lines)


register(SimpleNegotiation())
