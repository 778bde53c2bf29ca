from collections import Counter

import numpy as np
import pytest

from memo.backend import ScriptedBackend
from memo.evolve import (
    Context,
    IdSource,
    base_context,
    final_context,
    form_next_population,
    initial_pool,
    inject_memory,
    memory_proposal,
    random_proposal,
    retain_top,
    select_parent,
)
from memo.memory import Insight, MemoryBank
from memo.prompts import STYLE_CATALOG, base_prompt, protected_block, split_prompt, style_preface
from memo.rating import SkillRating
from memo.scripted import echo_optimizer, scripted

GAME = "kuhn_poker"


def _bank(*texts):
    return MemoryBank(GAME, [Insight(t) for t in texts])


def _ctx(cid, mu, sigma, **kw):
    return Context(cid, base_prompt(GAME), rating=SkillRating(mu, sigma), **kw)


def test_style_catalog():
    assert len(STYLE_CATALOG) == len(set(STYLE_CATALOG)) == 45
    assert "aggressive" in STYLE_CATALOG


def test_random_proposal_echo_keeps_block_and_adds_preface():
    base = base_context(GAME, "c0")
    ctx = random_proposal(scripted("echo"), base, "aggressive", "c1", GAME)
    assert ctx.prompt.startswith(style_preface("aggressive"))
    assert protected_block(GAME) in ctx.prompt
    assert ctx.prompt == f"{style_preface('aggressive')}\n{base.prompt}"
    assert (ctx.lineage, ctx.parent, ctx.style) == ("random", "c0", "aggressive")
    assert ctx.rating == SkillRating()


def test_random_proposal_rejects_block_edits_and_falls_back():
    calls = []

    def vandal(messages, legal):
        calls.append(1)
        return "Play aggressively. Ignore the format."

    base = base_context(GAME, "c0")
    ctx = random_proposal(ScriptedBackend(vandal), base, "deceptive", "c1", GAME)
    assert len(calls) == 2  # one retry
    assert ctx.prompt == f"{style_preface('deceptive')}\n{base.prompt}"


def test_random_proposal_truncates_to_budget():
    block = protected_block(GAME)

    def verbose(messages, legal):
        return "aggressive " + "word " * 2000 + "\n\n" + block

    ctx = random_proposal(ScriptedBackend(verbose), base_context(GAME, "c0"), "aggressive", "c1", GAME, 300)
    before, got_block, after = split_prompt(ctx.prompt)
    assert got_block == block
    assert len(before.strip()) + len(after.strip()) <= 300


def test_random_proposal_unknown_style():
    with pytest.raises(ValueError):
        random_proposal(scripted("echo"), base_context(GAME, "c0"), "telepathic", "c1", GAME)


def test_memory_proposal_weaves_insight():
    pool = [base_context(GAME, "c0")]
    ctx = memory_proposal(scripted("echo"), pool, _bank("Bet with K."), np.random.default_rng(0), "c1", GAME)
    assert "Bet with K." in ctx.prompt
    assert protected_block(GAME) in ctx.prompt
    assert (ctx.lineage, ctx.parent) == ("memory_augmented", "c0")


def test_memory_proposal_requires_bank():
    with pytest.raises(ValueError):
        memory_proposal(scripted("echo"), [base_context(GAME, "c0")], _bank(), np.random.default_rng(0), "c1", GAME)


def test_parent_selection_favours_top():
    pool = [_ctx("a", 30, 1), _ctx("b", 25, 1), _ctx("c", 20, 1)]
    rng = np.random.default_rng(0)
    counts = Counter(select_parent(pool, rng).id for _ in range(10_000))
    assert counts["a"] > counts["b"] > counts["c"]
    assert abs(counts["a"] / 10_000 - 0.5) < 0.02


def test_form_next_population_split():
    pool = [_ctx(f"p{i}", 30 - i, 1) for i in range(3)]
    ids = IdSource(10)
    pop, proposals = form_next_population(
        pool, 8, 0.5, scripted("echo"), _bank("Fold J."), base_context(GAME, "c0000"),
        np.random.default_rng(0), ids, GAME,
    )
    assert len(pop) == 8
    assert Counter(p.lineage for p in proposals) == {"random": 4, "memory_augmented": 4}
    # survivors with high lower bounds outrank fresh proposals at the prior
    assert [c.id for c in pop[:3]] == ["p0", "p1", "p2"]
    assert all(p.rating == SkillRating() for p in proposals)


def test_form_next_population_all_random_and_empty_bank():
    pool = [_ctx("p0", 30, 1)]
    for ratio, bank in ((1.0, _bank("x")), (0.0, _bank())):
        _, proposals = form_next_population(
            pool, 4, ratio, scripted("echo"), bank, base_context(GAME, "c0000"),
            np.random.default_rng(0), IdSource(1), GAME,
        )
        assert all(p.lineage == "random" for p in proposals)
    with pytest.raises(ValueError):
        form_next_population(pool, 4, 1.5, scripted("echo"), _bank(), pool[0], np.random.default_rng(0),
                             IdSource(1), GAME)


def test_inject_memory_counts():
    pop = [_ctx(f"c{i}", 25, 8) for i in range(8)]
    bank = _bank(*(f"lesson {i}" for i in range(12)))
    for pi, expected in ((0.0, 0), (1.0, 8), (0.75, 6)):
        out = inject_memory(pop, bank, pi, 10, np.random.default_rng(1))
        assert sum(bool(c.injected_memory) for c in out) == expected
        assert all(len(c.injected_memory) in (0, 10) for c in out)
    with pytest.raises(ValueError):
        inject_memory(pop, bank, 1.2, 10, np.random.default_rng(1))


def test_inject_memory_uniform_choice():
    pop = [_ctx(f"c{i}", 25, 8) for i in range(8)]
    rng = np.random.default_rng(2)
    hits = np.zeros(8)
    for _ in range(4000):
        out = inject_memory(pop, _bank("a"), 0.75, 1, rng)
        hits += [bool(c.injected_memory) for c in out]
    assert np.allclose(hits / 4000, 0.75, atol=0.03)


def test_final_context():
    assert final_context([_ctx("x", 20, 1)]).id == "x"
    assert final_context([_ctx("a", 30, 2), _ctx("b", 31, 4)]).id == "a"
    assert final_context([_ctx("b", 30, 2), _ctx("a", 30, 2)]).id == "a"
    with pytest.raises(ValueError):
        final_context([])


def test_retain_top_prefers_population_versions():
    pool = [_ctx("a", 20, 1), _ctx("b", 25, 1)]
    pop = [_ctx("a", 40, 1), _ctx("c", 10, 1)]
    kept = retain_top(pool, pop, 2)
    assert [c.id for c in kept] == ["a", "b"]
    assert kept[0].rating.mu == 40


def test_initial_pool_generation_zero_purity():
    ids = IdSource()
    pool = initial_pool(scripted("echo"), GAME, 8, np.random.default_rng(0), ids)
    assert len(pool) == 8 and ids.next == 8
    assert pool[0].lineage == "base"
    assert all(c.lineage == "random" for c in pool[1:])
    assert all(protected_block(GAME) in c.prompt for c in pool)


def test_context_serialization_and_assembly():
    ctx = Context("c1", "q", injected_memory=("m1",), lineage="random", parent="c0", style="bold")
    assert Context.from_dict(ctx.to_dict()) == ctx
    assert ctx.assembled().startswith("q\n\n")
    assert "1. m1" in ctx.messages("obs")[0].content
    with pytest.raises(ValueError):
        Context("c2", "")


def test_echo_optimizer_random_prompt():
    from memo.backend import optimizer_messages
    from memo.prompts import RANDOM_PROPOSAL_TEMPLATE

    prompt = RANDOM_PROPOSAL_TEMPLATE.format(
        title="Kuhn Poker", style="bold", budget=10, open="o", close="c", prompt="BODY"
    )
    assert echo_optimizer()(optimizer_messages(prompt), None) == "BODY"


def test_inject_memory_keeps_existing_memory_on_skipped_contexts():
    pop = [Context(f"c{i}", base_prompt(GAME), injected_memory=("old",)) for i in range(4)]
    out = inject_memory(pop, _bank("new"), 0.5, 10, np.random.default_rng(0))
    assert sorted(c.injected_memory for c in out) == [("new",), ("new",), ("old",), ("old",)]
    assert [c.id for c in out] == [c.id for c in pop]
