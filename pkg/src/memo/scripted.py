"""Deterministic scripted policies for agents and optimizers.

Every policy is a pure function of the message list (and, on game turns, the
legal-action set), so runs built from them are bit-reproducible.
"""

from __future__ import annotations

import hashlib
import re
from collections.abc import Sequence

import numpy as np

from memo.backend import ChatMessage, Policy, ScriptedBackend
from memo.games.negotiation import OFFER, RESOURCES, format_offer
from memo.games.two_dollar import PROPOSE, format_cents


def message_rng(messages: Sequence[ChatMessage], salt: str = "") -> np.random.Generator:
    h = hashlib.blake2b(digest_size=8)
    h.update(salt.encode())
    for m in messages:
        h.update(m.role.encode() + b"\x00" + m.content.encode() + b"\x01")
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))


_QTY = re.compile(r"\+ \[(\w+)\]\s+Qty: (\d+)")


def instantiate(token: str, messages: Sequence[ChatMessage], rng: np.random.Generator) -> str:
    """Turn a template from the legal set into a concrete action."""
    if token == PROPOSE:
        return f"[Propose] {format_cents(int(rng.integers(0, 201)))}"
    if token == OFFER:
        owned = [name for name, q in _QTY.findall(messages[-1].content) if int(q) > 0]
        give = owned[int(rng.integers(len(owned)))] if owned else RESOURCES[0]
        take = RESOURCES[int(rng.integers(len(RESOURCES)))]
        g = [1 if r == give else 0 for r in RESOURCES]
        t = [1 if r == take else 0 for r in RESOURCES]
        return format_offer(tuple(g), tuple(t))
    return token


def random_legal(salt: str = "") -> Policy:
    def policy(messages, legal):
        if not legal:
            return "I have nothing to add."
        rng = message_rng(messages, salt)
        options = sorted(legal)
        choice = instantiate(options[int(rng.integers(len(options)))], messages, rng)
        return f"Let me pick a move. {choice}"

    return policy


def first_legal(messages, legal) -> str:
    if not legal:
        return ""
    choice = instantiate(sorted(legal)[0], messages, message_rng(messages))
    return f"I will play {choice}"


def garbage(messages, legal) -> str:
    return "I would rather not choose a move right now."


def preference(order: Sequence[str], fallback: Policy | None = None) -> Policy:
    """Play the first token of ``order`` that is legal."""
    fallback = fallback or random_legal()

    def policy(messages, legal):
        for token in order:
            if legal and token in legal:
                return f"My choice: {token}"
        return fallback(messages, legal)

    return policy


_KUHN_CARD = re.compile(r"Your card is: '([JQK])'")


def kuhn_value_play(messages, legal) -> str:
    """Bet and call with K, call with Q, check and fold with J."""
    cards = _KUHN_CARD.findall(messages[-1].content)
    card = cards[-1] if cards else "Q"
    if "[bet]" in legal:
        return "[bet]" if card == "K" else "[check]"
    return "[fold]" if card == "J" else "[call]"


def kuhn_pressure_play(messages, legal) -> str:
    """Bet whenever possible; facing a bet, call only with K."""
    cards = _KUHN_CARD.findall(messages[-1].content)
    card = cards[-1] if cards else "Q"
    if "[bet]" in legal:
        return "[bet]"
    return "[call]" if card == "K" else "[fold]"


def hint_follower(hint: str, strong: Policy, weak: Policy | None = None) -> Policy:
    """Play ``strong`` when ``hint`` appears in the system message, else ``weak``."""
    weak = weak or random_legal()

    def policy(messages, legal):
        if legal is not None and hint in messages[0].content:
            return strong(messages, legal)
        return weak(messages, legal)

    return policy


# ------------------------------------------------------------------- optimizer side


def _section(text: str, start: str, end: str | None = None) -> str:
    i = text.find(start)
    if i < 0:
        return ""
    i += len(start)
    j = text.find(end, i) if end else -1
    return text[i:j] if j >= 0 else text[i:]


def _numbered(block: str) -> list[str]:
    out = []
    for line in block.strip().splitlines():
        m = re.match(r"\s*\d+\.\s+(.*)", line)
        if m:
            out.append(m.group(1).strip())
    return out


def echo_optimizer(insight: str | None = None) -> Policy:
    """Optimizer that edits minimally.

    Random proposals come back unchanged, memory proposals prepend the lessons
    verbatim, reflections return ``insight`` (or a summary of the tallies), and
    merges add every new analysis not already in the library.
    """

    def policy(messages, legal):
        text = messages[-1].content
        if text.startswith("You are editing the instructions"):
            return _section(text, "CURRENT INSTRUCTIONS:\n")
        if text.startswith("You are improving the instructions"):
            lessons = _numbered(_section(text, "LESSONS FROM PAST GAMES:\n", "\n\nEDITING RULES"))
            current = _section(text, "CURRENT INSTRUCTIONS:\n")
            return "\n".join(lessons) + "\n" + current
        if text.startswith("You are analyzing strategically decisive states"):
            if insight is not None:
                return insight
            tally = _section(text, "STRATEGIC STATE OUTCOMES: ", "\n")
            return f"This state produced {tally}; prefer the line that led to wins."
        if text.startswith("You are maintaining a state analysis library"):
            new = _numbered(
                _section(text, "NEW STATE ANALYSES FROM RECENT GAMES:\n", "\n\nEXISTING STATE")
            )
            old = set(_numbered(_section(text, "EXISTING STATE ANALYSIS LIBRARY:\n", "\n\nOPERATION")))
            seen: list[str] = []
            for item in new:
                if item not in old and item not in seen:
                    seen.append(item)
            return "".join(f"<add>{item}</add>\n" for item in seen)
        return ""

    return policy


PLANTED_INSIGHT = (
    "Kuhn pressure play: bet whenever no bet is on the table; "
    "facing a bet, call only with K and fold otherwise."
)


def make_policy(name: str, insight: str = PLANTED_INSIGHT) -> Policy:
    if name == "random":
        return random_legal()
    if name == "first_legal":
        return first_legal
    if name == "garbage":
        return garbage
    if name == "always_bet":
        return preference(["[bet]", "[call]"])
    if name == "passive":
        return preference(["[check]", "[call]"])
    if name == "kuhn_value":
        return kuhn_value_play
    if name == "kuhn_pressure":
        return kuhn_pressure_play
    if name == "hint_follower":
        return hint_follower(insight, kuhn_pressure_play)
    if name == "echo":
        return echo_optimizer()
    if name == "planted":
        return echo_optimizer(insight)
    raise ValueError(f"unknown scripted policy {name!r}")


def scripted(name: str, **kwargs) -> ScriptedBackend:
    return ScriptedBackend(make_policy(name, **kwargs), name=name)
