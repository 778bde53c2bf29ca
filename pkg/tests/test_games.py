import itertools
import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memo.games import GAME_IDS, core, get_game
from memo.games.briscola import POINTS, BriscolaState, briscola_trick_winner
from memo.games.core import (
    ActionRecord,
    DigestMismatchError,
    GameError,
    Trajectory,
    UnknownGameError,
    extract_action,
    make_record,
)
from memo.games.kuhn import KuhnState, kuhn_round_resolution
from memo.games.negotiation import (
    NegotiationState,
    format_offer,
    negotiation_settlement,
    parse_offer,
)
from memo.games.tak import MARKS, TakState, tak_connection
from memo.games.two_dollar import TOTAL_CENTS, TwoDollarState, proposal_cents, twodollar_settlement
from oracles import KUHN_DEALS, KUHN_LINES, kuhn_line_payoff, tak_connected_oracle


def _play(state, *moves):
    for raw in moves:
        state = core.step(state, make_record(state, raw))
    return state


# ------------------------------------------------------------------ action parsing


def test_extract_single_token():
    assert extract_action("I think I should call here. [call]", {"[fold]", "[call]"}) == "[call]"


def test_extract_last_match_wins():
    legal = {f"[{i}]" for i in range(16)}
    assert extract_action("boxed{[6]} ... on reflection boxed{[0]}", legal) == "[0]"


def test_extract_none_without_brackets():
    assert extract_action("I will just pass.", {"[check]", "[bet]"}) is None


def test_extract_skips_illegal_trailing_token():
    assert extract_action("[bet] is my move, not [fold]", {"[check]", "[bet]"}) == "[bet]"


def test_extract_is_case_insensitive_for_keywords():
    assert extract_action("ok [ACCEPT]", {"[Accept]", "[Deny]"}) == "[Accept]"


def test_extract_templates():
    assert extract_action("I offer [Offer: 2 wheat, 1 Ore -> 3 Brick]", {"[Offer: ...]", "[Deny]"}) == (
        "[Offer: 2 Wheat, 1 Ore -> 3 Brick]"
    )
    assert extract_action("Fair is fair. [Propose] $1.2", {"[Propose] $X.XX"}) == "[Propose] $1.20"
    assert extract_action("[Propose] no amount", {"[Propose] $X.XX"}) is None


@given(st.text())
@settings(max_examples=300)
def test_extract_never_returns_illegal(raw):
    legal = {"[check]", "[bet]"}
    got = extract_action(raw, legal)
    assert got is None or got in legal


# ------------------------------------------------------------------- core contract


def test_unknown_game():
    with pytest.raises(UnknownGameError):
        core.new_game("chess", 1)


def test_new_game_is_deterministic():
    assert core.new_game("kuhn_poker", 42) == core.new_game("kuhn_poker", 42)


def test_briscola_initial_state():
    s = core.new_game("briscola", 5)
    assert len(s.hands[0]) == len(s.hands[1]) == 3
    assert s.deck[-1] == s.trump
    assert len(s.deck) == 34
    assert core.legal_actions(s) == {"[play 1]", "[play 2]", "[play 3]"}
    assert f"Trump suit: {s.trump[1]}" in core.observe(s, 0)


def test_tak_initial_state():
    s = core.new_game("simpletak", 9)
    assert core.legal_actions(s) == {f"[{i}]" for i in range(16)}


def test_step_errors():
    s = core.new_game("kuhn_poker", 1)
    with pytest.raises(GameError):
        core.step(s, ActionRecord(1, "[bet]", "[bet]", True))
    t = core.new_game("simpletak", 1)
    for cell in (0, 1, 4, 5, 8, 9, 12):
        t = _play(t, f"[{cell}]")
    assert core.is_terminal(t)
    with pytest.raises(GameError):
        core.step(t, ActionRecord(1, "[2]", "[2]", True))


def test_outcome_requires_terminal():
    with pytest.raises(GameError):
        core.outcome(core.new_game("briscola", 1))


def test_legal_actions_of_terminal_state():
    s = core.new_game("kuhn_poker", 1)
    s = _play(s, "nothing")
    with pytest.raises(GameError):
        core.legal_actions(s)


@pytest.mark.parametrize("game_id", GAME_IDS)
def test_invalid_response_forfeits(game_id):
    s = core.new_game(game_id, 3)
    actor = core.to_move(s)
    rec = make_record(s, "I refuse to choose.")
    if game_id == "simple_negotiation":
        # no parseable response defaults to [Deny], which is legal
        assert rec.valid
        return
    assert not rec.valid
    s = core.step(s, rec)
    assert core.is_terminal(s)
    assert core.outcome(s) == (-1 if actor == 0 else 1)


def test_occupied_tak_cell_is_invalid():
    s = _play(core.new_game("simpletak", 0), "[5]")
    rec = make_record(s, "[5]")
    assert not rec.valid and rec.extracted is None


@pytest.mark.parametrize("game_id", GAME_IDS)
def test_random_playouts_keep_contract(game_id):
    game = get_game(game_id)
    rng = np.random.default_rng(0)
    for seed in range(10_000 if game_id in ("kuhn_poker", "simpletak") else 1_000):
        state = game.new_game(seed)
        while not core.is_terminal(state):
            legal = core.legal_actions(state)
            assert legal
            rec = make_record(state, game.random_action(state, rng))
            assert rec.valid, (game_id, seed, rec)
            state = core.step(state, rec)
        assert core.outcome(state) in (-1, 0, 1)


def test_fuzz_all_games_ten_thousand():
    # the slower games get their 10^4 playouts here with less bookkeeping per game
    rng = np.random.default_rng(1)
    for game_id in ("briscola", "simple_negotiation", "two_dollar"):
        game = get_game(game_id)
        for seed in range(10_000):
            state = game.new_game(seed)
            moves = 0
            while not core.is_terminal(state):
                state = core.step(state, make_record(state, game.random_action(state, rng)))
                moves += 1
            assert state.forfeited_by is None
            assert moves <= 40


@pytest.mark.parametrize("game_id", GAME_IDS)
def test_replay_reproduces_digests(game_id):
    rng = np.random.default_rng(4)
    traj = core.random_playout(game_id, 77, rng)
    state = core.new_game(game_id, 77)
    for s in traj.steps:
        assert core.observe(state, s.record.actor) == s.observation
        state = core.step(state, s.record)
        assert core.state_digest(state) == s.digest
    for k in range(traj.horizon + 1):
        assert core.state_digest(core.resume(traj.prefix(k))) == traj.prefix(k).state_digest


def test_resume_detects_tampering():
    traj = core.random_playout("kuhn_poker", 5, np.random.default_rng(0))
    pre = traj.prefix(2)
    bad = replace(pre, state_digest="0" * 16)
    with pytest.raises(DigestMismatchError):
        core.resume(bad)


def test_trajectory_log_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    trajs = [core.random_playout(g, 3, rng) for g in GAME_IDS]
    path = tmp_path / "t.jsonl"
    core.write_trajectories(path, trajs)
    back = core.read_trajectories(path)
    assert [t.to_dict() for t in back] == [t.to_dict() for t in trajs]
    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == {"game_id", "seed", "steps", "outcome", "horizon"}
    assert isinstance(back[0], Trajectory)


@pytest.mark.parametrize("game_id", GAME_IDS)
def test_zero_sum_outcomes(game_id):
    rng = np.random.default_rng(8)
    for seed in range(50):
        traj = core.random_playout(game_id, seed, rng)
        assert traj.outcome in (-1, 0, 1)


# -------------------------------------------------------------------------- Kuhn


def test_kuhn_lines_match_oracle():
    for cards in KUHN_DEALS:
        for line in KUHN_LINES:
            for first in (0, 1):
                assert kuhn_round_resolution(line, cards, first) == kuhn_line_payoff(line, cards, first)


def test_kuhn_engine_rounds_match_oracle():
    for cards in KUHN_DEALS:
        for line in KUHN_LINES:
            s = KuhnState(deals=(cards, (0, 1), (0, 1)))
            before = s.chips
            s = _play(s, *(f"[{m}]" for m in line))
            assert s.round == 1
            net = (s.chips[0] - before[0], s.chips[1] - before[1])
            assert net == kuhn_line_payoff(line, cards)
            assert sum(s.chips) + s.pot == 20


def test_kuhn_examples():
    # Q calls a bet against K: caller nets -2
    assert kuhn_round_resolution(["bet", "call"], (2, 1)) == (2, -2)
    assert kuhn_round_resolution(["check", "check"], (2, 0)) == (1, -1)
    assert kuhn_round_resolution(["bet", "fold"], (0, 2)) == (1, -1)
    with pytest.raises(ValueError):
        kuhn_round_resolution(["bet", "bet"], (0, 1))


def test_kuhn_legal_sets_and_observation():
    s = core.new_game("kuhn_poker", 11)
    assert core.legal_actions(s) == {"[check]", "[bet]"}
    s = _play(s, "[bet]")
    assert core.legal_actions(s) == {"[fold]", "[call]"}
    obs = core.observe(s, 1)
    assert "Your available actions are: '[fold]', '[call]'" in obs
    assert "Player 0, submitted move: '[bet]'." in obs


def test_kuhn_observation_hides_opponent_card():
    s = core.new_game("kuhn_poker", 11)
    c0, c1 = s.deals[0]
    if c0 == c1:
        pytest.skip("cards are distinct by construction")
    obs0 = core.observe(s, 0)
    assert f"Your card is: '{'JQK'[c0]}'" in obs0
    swapped = replace(s, deals=((c0, 3 - c0 - c1),) + s.deals[1:])
    assert core.observe(swapped, 0) == obs0


def test_kuhn_first_actor_alternates():
    s = core.new_game("kuhn_poker", 2)
    s = _play(s, "[check]", "[check]")
    assert core.to_move(s) == 1


def test_kuhn_chips_conserved():
    rng = np.random.default_rng(5)
    for seed in range(200):
        traj = core.random_playout("kuhn_poker", seed, rng)
        s = core.replay_records("kuhn_poker", seed, traj.records)
        assert sum(s.chips) + s.pot == 20


# ----------------------------------------------------------------------- Briscola


def test_briscola_trick_examples():
    assert briscola_trick_winner(("A", "♥"), ("2", "♣"), "♣") == 1
    assert briscola_trick_winner(("3", "♠"), ("K", "♠"), "♣") == 0
    assert briscola_trick_winner(("7", "♦"), ("A", "♥"), "♣") == 0
    assert briscola_trick_winner(("2", "♣"), ("A", "♥"), "♣") == 0
    assert briscola_trick_winner(("K", "♣"), ("3", "♣"), "♣") == 1


def test_briscola_totals():
    rng = np.random.default_rng(6)
    game = get_game("briscola")
    for seed in range(300):
        s = game.new_game(seed)
        while not core.is_terminal(s):
            s = core.step(s, make_record(s, game.random_action(s, rng)))
        assert sum(s.points) == 120
        assert s.tricks_played == 20


def test_briscola_point_table():
    assert sum(POINTS.values()) * 4 == 120


def test_briscola_even_split_draws():
    s = core.new_game("briscola", 1)
    s = replace(s, deck=(), hands=((), ()), points=(60, 60), tricks_played=20)
    assert isinstance(s, BriscolaState)
    assert core.outcome(s) == 0


def test_briscola_observation_hides_opponent_hand():
    s = core.new_game("briscola", 12)
    obs = core.observe(s, 0)
    for rank, suit in s.hands[1]:
        if (rank, suit) not in s.hands[0] and (rank, suit) != s.trump:
            assert f"{rank}{suit}" not in obs


# -------------------------------------------------------------------------- Tak


def test_tak_connection_examples():
    grid = [""] * 16
    for c in (0, 4, 8, 12):
        grid[c] = "O"
    assert tak_connection(grid, "O")
    grid = [""] * 16
    for c in (0, 5, 10, 15):
        grid[c] = "O"
    assert not tak_connection(grid, "O")


def test_tak_connection_matches_flood_fill_oracle():
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        grid = [("", "O", "X")[i] for i in rng.integers(0, 3, size=16)]
        for mark in MARKS:
            assert tak_connection(grid, mark) == tak_connected_oracle(grid, mark)


def test_tak_full_board_draw_exists():
    found = None
    for cells in itertools.combinations(range(16), 8):
        grid = ["X"] * 16
        for c in cells:
            grid[c] = "O"
        if not tak_connection(grid, "O") and not tak_connection(grid, "X"):
            found = grid
            break
    assert found is not None
    s = TakState(grid=tuple(found), moves=16)
    assert core.is_terminal(s) and core.outcome(s) == 0


def test_tak_games_end_within_sixteen_moves():
    rng = np.random.default_rng(9)
    for seed in range(500):
        assert core.random_playout("simpletak", seed, rng).horizon <= 16


# ------------------------------------------------------------------- negotiation


def _neg_state():
    values = ((6, 10, 12, 20, 38), (30, 8, 9, 14, 5))
    inv = ((14, 5, 5, 5, 5), (5, 5, 5, 5, 5))
    return NegotiationState(inventories=inv, values=values, initial=inv)


def test_negotiation_no_trade_draws():
    s = replace(_neg_state(), turn=10)
    assert negotiation_settlement(s) == 0


def test_negotiation_trade_ledger():
    s = _neg_state()
    s = _play(s, "[Offer: 1 Wheat -> 1 Ore]", "[Accept]")
    assert s.inventories[0] == (13, 5, 5, 5, 6)
    assert s.inventories[1] == (6, 5, 5, 5, 4)
    # gains at own values: p0 = -6 + 38 = 32, p1 = 30 - 5 = 25
    s = replace(s, turn=10)
    assert negotiation_settlement(s) == 1


def test_negotiation_deny_leaves_inventories():
    s = _neg_state()
    t = _play(s, "[Offer: 2 Wood -> 1 Sheep]", "[Deny]")
    assert t.inventories == s.inventories
    assert not t.pending


def test_negotiation_offer_round_trip():
    give, take = (1, 0, 2, 0, 0), (0, 0, 0, 3, 0)
    assert parse_offer(format_offer(give, take)) == (give, take)


def test_negotiation_quantities_never_negative():
    rng = np.random.default_rng(10)
    game = get_game("simple_negotiation")
    for seed in range(300):
        s = game.new_game(seed)
        while not core.is_terminal(s):
            s = core.step(s, make_record(s, game.random_action(s, rng)))
            assert all(q >= 0 for inv in s.inventories for q in inv)


def test_negotiation_observation_hides_opponent_values():
    s = _neg_state()
    obs = core.observe(s, 0)
    assert "Value: 38" in obs
    assert "Value: 30" not in obs


# ---------------------------------------------------------------------- two dollar


def test_twodollar_settlements():
    s = core.new_game("two_dollar", 1)
    t = _play(s, "I deserve more. [Propose] $1.20", "[Accept]")
    assert t.shares == (120, 80) and core.outcome(t) == 1
    t = _play(s, "[Propose] $1.00", "[Accept]")
    assert core.outcome(t) == 0
    t = s
    while not core.is_terminal(t):
        t = _play(t, "[Propose] $1.50" if not t.pending else "[Reject]")
    assert t.round == 21 and not t.shares and core.outcome(t) == 0


def test_twodollar_split_sums():
    rng = np.random.default_rng(11)
    for seed in range(500):
        traj = core.random_playout("two_dollar", seed, rng)
        s = core.replay_records("two_dollar", seed, traj.records)
        if s.shares:
            assert sum(s.shares) == TOTAL_CENTS


def test_twodollar_secret_instructions_private():
    from memo.games.two_dollar import SECRET_INSTRUCTIONS

    s = core.new_game("two_dollar", 4)
    assert isinstance(s, TwoDollarState)
    obs0 = core.observe(s, 0)
    assert SECRET_INSTRUCTIONS[s.instructions[0]] in obs0
    assert SECRET_INSTRUCTIONS[s.instructions[1]] not in obs0


def test_twodollar_settlement_function():
    s = replace(core.new_game("two_dollar", 0), shares=(80, 120))
    assert twodollar_settlement(s) == -1
    assert proposal_cents("[Propose] $0.05") == 5
