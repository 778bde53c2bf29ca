import numpy as np
import pytest

from memo.backend import ScriptedBackend
from memo.games import core
from memo.games.core import Step, Trajectory
from memo.memory import Insight, MemoryBank
from memo.reflection import (
    DecisiveState,
    merge_insights,
    merge_prompt,
    reflect,
    reflection_prompt,
    select_decisive_states,
)
from memo.scripted import echo_optimizer, scripted


def _kuhn_traj(seed, moves, outcome):
    state = core.new_game("kuhn_poker", seed)
    traj = Trajectory("kuhn_poker", seed)
    for m in moves:
        obs = core.observe(state, core.to_move(state))
        rec = core.make_record(state, m)
        state = core.step(state, rec)
        traj.steps.append(Step(obs, rec, core.state_digest(state)))
    traj.outcome = outcome
    return traj


def test_decisive_state_variance():
    s = DecisiveState("d", "r", wins=2, losses=2, draws=0)
    assert s.variance == pytest.approx(1.0)
    assert DecisiveState("d", "r", 3, 0, 0).variance == 0.0


def test_selects_shared_states_by_variance():
    # identical seeds reach identical states; outcomes differ after the shared opening
    a = _kuhn_traj(1, ["[bet]", "[call]"], 1)
    b = _kuhn_traj(1, ["[bet]", "[fold]"], -1)
    c = _kuhn_traj(1, ["[check]", "[check]"], 1)
    d = _kuhn_traj(1, ["[check]", "[bet]"], 1)
    states = select_decisive_states([a, b, c, d])
    assert states, "the shared post-bet state must be found"
    top = states[0]
    assert top.visits == 2 and top.wins == 1 and top.losses == 1
    # player 1 acts after the bet, so the tally is from player 1's view
    assert "Player 0, submitted move: '[bet]'." in top.rendering


def test_singletons_are_ignored():
    a = _kuhn_traj(1, ["[bet]", "[call]"], 1)
    b = _kuhn_traj(2, ["[bet]", "[call]"], 1)
    assert all(s.visits >= 2 for s in select_decisive_states([a, b]))


def test_requires_trajectories():
    with pytest.raises(ValueError):
        select_decisive_states([])


def test_random_tournament_has_decisive_states():
    rng = np.random.default_rng(0)
    trajs = [core.random_playout("kuhn_poker", int(s), rng) for s in rng.integers(0, 2**63, 400)]
    states = select_decisive_states(trajs, limit=8)
    assert len(states) == 8
    assert [s.variance for s in states] == sorted((s.variance for s in states), reverse=True)


def test_reflection_prompt_fields():
    text = reflection_prompt(DecisiveState("d", "BOARD", 3, 1, 2))
    assert "STRATEGIC STATE VIEW: BOARD" in text
    assert "STRATEGIC STATE OUTCOMES: 3 wins, 1 losses, 2 draws" in text


def test_reflect_returns_text_or_none():
    state = DecisiveState("d", "BOARD", 1, 1, 0)
    assert reflect(scripted("planted"), state).startswith("Kuhn pressure play")
    assert reflect(ScriptedBackend(lambda m, legal: "   "), state) is None


def test_merge_insights_adds_candidates():
    bank = MemoryBank("kuhn_poker")
    outcome = merge_insights(scripted("echo"), bank, ["Bet with K.", "Bet with K.", "Fold J."], 1)
    assert bank.texts() == ["Bet with K.", "Fold J."]
    assert outcome.reports[0].added == ["Bet with K.", "Fold J."]


def test_merge_prompt_lists_library():
    bank = MemoryBank("kuhn_poker", [Insight("old")])
    text = merge_prompt(["new"], bank)
    assert "NEW STATE ANALYSES FROM RECENT GAMES:\n1. new" in text
    assert "EXISTING STATE ANALYSIS LIBRARY:\n1. old" in text


def test_merge_consolidates_over_soft_cap():
    calls = []

    def policy(messages, legal):
        calls.append(messages[-1].content)
        if "above the limit" in messages[-1].content:
            return "".join(f'<remove number="{n}">dup</remove>' for n in range(1, 4))
        return "<add>a</add><add>b</add><add>c</add><add>d</add>"

    bank = MemoryBank("kuhn_poker")
    outcome = merge_insights(ScriptedBackend(policy), bank, ["x"], 0, soft_cap=2)
    assert len(calls) == 2
    assert bank.texts() == ["d"]
    assert len(outcome.reports) == 2


def test_merge_with_no_candidates_is_noop():
    bank = MemoryBank("kuhn_poker")
    out = merge_insights(ScriptedBackend(echo_optimizer()), bank, [], 0)
    assert out.reports == [] and len(bank) == 0


def test_bad_ops_are_reported():
    bank = MemoryBank("kuhn_poker", [Insight("only")])
    out = merge_insights(ScriptedBackend(lambda m, legal: '<edit number="9">x</edit>'), bank, ["c"], 0)
    assert bank.texts() == ["only"]
    assert out.reports[0].rejected
