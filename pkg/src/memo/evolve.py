"""Candidate contexts: proposals, memory injection, pool and population selection."""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from memo.backend import (
    OPTIMIZER_MAX_TOKENS,
    ChatMessage,
    ModelBackend,
    assemble,
    optimizer_messages,
)
from memo.games import get_game
from memo.memory import MemoryBank, render_memory, subsample
from memo.prompts import (
    BASE_SYSTEM_PROMPT,
    MEMORY_PROPOSAL_TEMPLATE,
    PROTECTED_CLOSE,
    PROTECTED_OPEN,
    RANDOM_PROPOSAL_TEMPLATE,
    STYLE_CATALOG,
    base_prompt,
    split_prompt,
    style_preface,
)
from memo.rating import SkillRating, lcb_score

DEFAULT_LENGTH_BUDGET = 1200


@dataclass(frozen=True)
class Context:
    id: str
    prompt: str
    injected_memory: tuple[str, ...] = ()
    rating: SkillRating = field(default_factory=SkillRating)
    lineage: str = "base"  # base | random | memory_augmented
    parent: str | None = None
    style: str | None = None
    games: int = 0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("context prompt must be non-empty")

    @property
    def memory_block(self) -> str:
        return render_memory(list(self.injected_memory))

    def assembled(self) -> str:
        """The full context text: prompt followed by the rendered memory."""
        return "\n\n".join(p for p in (self.prompt, self.memory_block) if p)

    def messages(self, observation: str, system_base: str = BASE_SYSTEM_PROMPT) -> list[ChatMessage]:
        return assemble(self.prompt, self.memory_block, observation, system_base)

    def score(self, kappa: float = 1.0) -> float:
        return lcb_score(self.rating, kappa)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "prompt": self.prompt,
            "injected_memory": list(self.injected_memory),
            "rating": self.rating.to_dict(),
            "lineage": self.lineage,
            "parent": self.parent,
            "style": self.style,
            "games": self.games,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Context:
        return cls(
            id=data["id"],
            prompt=data["prompt"],
            injected_memory=tuple(data.get("injected_memory", ())),
            rating=SkillRating(**data["rating"]) if "rating" in data else SkillRating(),
            lineage=data.get("lineage", "base"),
            parent=data.get("parent"),
            style=data.get("style"),
            games=data.get("games", 0),
        )


def rank_contexts(contexts: Iterable[Context], kappa: float = 1.0) -> list[Context]:
    return sorted(contexts, key=lambda c: (-c.score(kappa), c.rating.sigma, c.id))


def top_n(contexts: Iterable[Context], n: int, kappa: float = 1.0) -> list[Context]:
    return rank_contexts(contexts, kappa)[:n]


def retain_top(
    pool: Sequence[Context], population: Sequence[Context], max_size: int, kappa: float = 1.0
) -> list[Context]:
    """Best ``max_size`` of pool and population; population versions win on id clashes."""
    merged = {c.id: c for c in pool}
    merged.update({c.id: c for c in population})
    return top_n(merged.values(), max_size, kappa)


def final_context(pool: Sequence[Context], kappa: float = 1.0) -> Context:
    if not pool:
        raise ValueError("candidate pool is empty")
    return rank_contexts(pool, kappa)[0]


class IdSource:
    """Sequential context ids; the counter is checkpointed with the run."""

    def __init__(self, start: int = 0) -> None:
        self.next = start

    def __call__(self) -> str:
        cid = f"c{self.next:04d}"
        self.next += 1
        return cid


# ---------------------------------------------------------------------- proposals


def _truncate(text: str, budget: int) -> str:
    if len(text) <= budget:
        return text
    cut = text[:budget]
    space = cut.rfind(" ")
    return cut[:space] if space > budget // 2 else cut


def _enforce(candidate: str, protected: str, budget: int) -> str | None:
    """Accept an edited prompt if it keeps the protected block; trim it to budget."""
    before, block, after = split_prompt(candidate)
    if not protected or block != protected:
        return None
    before, after = before.strip(), after.strip()
    editable = len(before) + len(after)
    if editable > budget:
        before = _truncate(before, budget)
        after = _truncate(after, max(0, budget - len(before)))
    parts = [p for p in (before, block, after) if p]
    return "\n\n".join(parts)


def _ask(model: ModelBackend, prompt: str, protected: str, budget: int, attempts: int = 2) -> str | None:
    for _ in range(attempts):
        reply = model.complete(optimizer_messages(prompt), OPTIMIZER_MAX_TOKENS)
        edited = _enforce(reply or "", protected, budget)
        if edited is not None:
            return edited
    return None


def _with_preface(prompt: str, style: str) -> str:
    before, block, after = split_prompt(prompt)
    if style.lower() in before.lower():
        return prompt
    return f"{style_preface(style)}\n{prompt}"


def random_proposal(
    model: ModelBackend,
    base: Context,
    style: str,
    new_id: str,
    game_id: str,
    length_budget: int = DEFAULT_LENGTH_BUDGET,
) -> Context:
    """Style-guided edit of ``base``; falls back to base plus preface."""
    if style not in STYLE_CATALOG:
        raise ValueError(f"style {style!r} is not in the catalog")
    _, protected, _ = split_prompt(base.prompt)
    request = RANDOM_PROPOSAL_TEMPLATE.format(
        title=get_game(game_id).title,
        style=style,
        budget=length_budget,
        open=PROTECTED_OPEN,
        close=PROTECTED_CLOSE,
        prompt=base.prompt,
    )
    edited = _ask(model, request, protected, length_budget)
    prompt = _with_preface(edited if edited is not None else base.prompt, style)
    prompt = _enforce(prompt, protected, length_budget) or prompt
    return Context(new_id, prompt, lineage="random", parent=base.id, style=style)


def select_parent(pool: Sequence[Context], rng: np.random.Generator, kappa: float = 1.0) -> Context:
    """Rank-weighted draw: the i-th best of n has weight n - i."""
    ranked = rank_contexts(pool, kappa)
    n = len(ranked)
    weights = np.arange(n, 0, -1, dtype=float)
    return ranked[int(rng.choice(n, p=weights / weights.sum()))]


def memory_proposal(
    model: ModelBackend,
    pool: Sequence[Context],
    bank: MemoryBank,
    rng: np.random.Generator,
    new_id: str,
    game_id: str,
    k: int = 3,
    length_budget: int = DEFAULT_LENGTH_BUDGET,
    kappa: float = 1.0,
) -> Context:
    """Edit a top-biased pool member to incorporate sampled insights."""
    if len(bank) == 0:
        raise ValueError("memory proposals need a non-empty memory bank")
    if not pool:
        raise ValueError("candidate pool is empty")
    parent = select_parent(pool, rng, kappa)
    lessons = [i.text for i in subsample(bank, k, rng)]
    _, protected, _ = split_prompt(parent.prompt)
    request = MEMORY_PROPOSAL_TEMPLATE.format(
        title=get_game(game_id).title,
        lessons="\n".join(f"{n}. {t}" for n, t in enumerate(lessons, start=1)),
        budget=length_budget,
        open=PROTECTED_OPEN,
        close=PROTECTED_CLOSE,
        prompt=parent.prompt,
    )
    edited = _ask(model, request, protected, length_budget)
    if edited is None:
        before, block, after = split_prompt(parent.prompt)
        woven = "\n".join([before.strip(), *lessons])
        edited = _enforce("\n\n".join(p for p in (woven, block, after.strip()) if p), protected, length_budget)
    return Context(new_id, edited, lineage="memory_augmented", parent=parent.id)


def base_context(game_id: str, new_id: str) -> Context:
    return Context(new_id, base_prompt(game_id), lineage="base")


def initial_pool(
    model: ModelBackend,
    game_id: str,
    n: int,
    rng: np.random.Generator,
    ids: IdSource,
    length_budget: int = DEFAULT_LENGTH_BUDGET,
) -> list[Context]:
    """The base context plus n - 1 random proposals."""
    base = base_context(game_id, ids())
    pool = [base]
    for _ in range(n - 1):
        style = STYLE_CATALOG[int(rng.integers(len(STYLE_CATALOG)))]
        pool.append(random_proposal(model, base, style, ids(), game_id, length_budget))
    return pool


def form_next_population(
    pool: Sequence[Context],
    n: int,
    r_random: float,
    model: ModelBackend,
    bank: MemoryBank,
    base: Context,
    rng: np.random.Generator,
    ids: IdSource,
    game_id: str,
    kappa: float = 1.0,
    length_budget: int = DEFAULT_LENGTH_BUDGET,
    k: int = 3,
) -> tuple[list[Context], list[Context]]:
    """TopN over pool and fresh proposals; returns (population, proposals).

    floor(n * r_random) proposals are random; the rest are memory-augmented, or
    random when the bank is still empty. Proposals start at the prior rating.
    """
    if not 0 <= r_random <= 1:
        raise ValueError("r_random must lie in [0, 1]")
    n_random = int(np.floor(n * r_random))
    proposals = []
    for i in range(n):
        if i < n_random or len(bank) == 0:
            style = STYLE_CATALOG[int(rng.integers(len(STYLE_CATALOG)))]
            proposals.append(random_proposal(model, base, style, ids(), game_id, length_budget))
        else:
            proposals.append(
                memory_proposal(model, pool, bank, rng, ids(), game_id, k, length_budget, kappa)
            )
    return top_n(itertools.chain(pool, proposals), n, kappa), proposals


def injection_slots(n: int, pi: float, rng: np.random.Generator) -> list[int]:
    """Indices of the round(pi * n) contexts that receive memory, chosen uniformly."""
    if not 0 <= pi <= 1:
        raise ValueError("pi must lie in [0, 1]")
    count = int(np.floor(pi * n + 0.5))
    return sorted(int(i) for i in rng.choice(n, size=count, replace=False)) if count else []


def inject_memory(
    population: Sequence[Context],
    bank: MemoryBank,
    pi: float,
    k: int,
    rng: np.random.Generator,
) -> list[Context]:
    """round(pi * N) uniformly chosen contexts get a fresh subset.

    The others keep whatever memory they already carry: M is part of the
    candidate, so a survivor's rating keeps describing the same (q, M).
    """
    chosen = set(injection_slots(len(population), pi, rng))
    out = []
    for i, ctx in enumerate(population):
        if i in chosen:
            ctx = replace(ctx, injected_memory=tuple(ins.text for ins in subsample(bank, k, rng)))
        out.append(ctx)
    return out
