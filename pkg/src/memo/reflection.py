"""Decisive-state selection, trajectory reflection and memory merging."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

from memo.backend import OPTIMIZER_MAX_TOKENS, ModelBackend, optimizer_messages
from memo.games.core import Trajectory
from memo.memory import (
    SOFT_CAP,
    MemoryBank,
    MergeReport,
    normalize_text,
    parse_memory_ops,
)
from memo.prompts import CONSOLIDATION_REQUEST, MEMORY_OPERATION_TEMPLATE, REFLECTION_TEMPLATE

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecisiveState:
    digest: str
    rendering: str
    wins: int
    losses: int
    draws: int

    @property
    def visits(self) -> int:
        return self.wins + self.losses + self.draws

    @property
    def variance(self) -> float:
        n = self.visits
        mean = (self.wins - self.losses) / n
        return (self.wins + self.losses) / n - mean * mean


def select_decisive_states(
    trajectories: Sequence[Trajectory], limit: int | None = None
) -> list[DecisiveState]:
    """Intermediate states reached by >= 2 games, by outcome variance (descending).

    Outcomes are tallied from the perspective of the player to act in the state;
    the rendering is that player's observation.
    """
    if not trajectories:
        raise ValueError("need at least one trajectory")
    tallies: dict[str, list] = {}
    for traj in trajectories:
        if traj.outcome is None:
            continue
        seen = set()
        for before, after in zip(traj.steps, traj.steps[1:]):
            digest = before.digest
            if digest in seen:
                continue
            seen.add(digest)
            actor = after.record.actor
            result = traj.outcome if actor == 0 else -traj.outcome
            entry = tallies.setdefault(digest, [after.observation, 0, 0, 0])
            entry[{1: 1, -1: 2, 0: 3}[result]] += 1
    states = [
        DecisiveState(d, rendering, w, l, dr)
        for d, (rendering, w, l, dr) in tallies.items()
        if w + l + dr >= 2
    ]
    states.sort(key=lambda s: (-s.variance, -s.visits, s.digest))
    return states if limit is None else states[:limit]


def reflection_prompt(state: DecisiveState) -> str:
    return REFLECTION_TEMPLATE.format(
        strategic_state=state.rendering,
        wins=state.wins,
        losses=state.losses,
        draws=state.draws,
    )


def reflect(model: ModelBackend, state: DecisiveState) -> str | None:
    """One candidate insight from a decisive state, or None if the model said nothing."""
    text = model.complete(optimizer_messages(reflection_prompt(state)), OPTIMIZER_MAX_TOKENS)
    text = normalize_text(text or "")
    return text or None


def merge_prompt(candidates: Sequence[str], bank: MemoryBank) -> str:
    new = "\n".join(f"{n}. {normalize_text(c)}" for n, c in enumerate(candidates, start=1))
    return MEMORY_OPERATION_TEMPLATE.format(
        new_abstracts_formatted=new or "(none)",
        old_abstracts_formatted=bank.numbered(),
    )


@dataclass
class MergeOutcome:
    reports: list[MergeReport]
    diagnostics: list[str]

    def to_dict(self) -> dict:
        return {
            "reports": [r.to_dict() for r in self.reports],
            "diagnostics": self.diagnostics,
        }


def merge_insights(
    model: ModelBackend,
    bank: MemoryBank,
    candidates: Sequence[str],
    generation: int,
    soft_cap: int = SOFT_CAP,
) -> MergeOutcome:
    """Ask the model for add/edit/remove ops and apply them to ``bank`` in place.

    If the bank ends above ``soft_cap`` the request is re-issued once asking for
    consolidation; the hard cap inside the bank bounds it regardless.
    """
    outcome = MergeOutcome([], [])
    if not candidates:
        return outcome
    response = model.complete(optimizer_messages(merge_prompt(candidates, bank)), OPTIMIZER_MAX_TOKENS)
    ops, diags = parse_memory_ops(response)
    outcome.diagnostics.extend(diags)
    outcome.reports.append(bank.merge(ops, generation))
    if len(bank) > soft_cap:
        prompt = merge_prompt([], bank) + CONSOLIDATION_REQUEST.format(size=len(bank), cap=soft_cap)
        response = model.complete(optimizer_messages(prompt), OPTIMIZER_MAX_TOKENS)
        ops, diags = parse_memory_ops(response)
        outcome.diagnostics.extend(diags)
        outcome.reports.append(bank.merge(ops, generation))
    return outcome
