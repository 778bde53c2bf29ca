import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kendalltau

from memo.rating import (
    BETA,
    MU0,
    SIGMA0,
    TAU,
    SkillRating,
    TrueSkillParams,
    kendall_tau_b,
    lcb_score,
    leaderboard,
    rate_match,
    rse,
    tau_b_matrix,
    trueskill_update,
    write_leaderboard,
)
from oracles import trueskill_posterior


def test_defaults():
    p = TrueSkillParams()
    assert (p.mu, p.sigma) == (25.0, 25.0 / 3)
    assert BETA == SIGMA0 / 2 and TAU == SIGMA0 / 100
    assert p.prior() == SkillRating(MU0, SIGMA0)


def test_equal_priors_win():
    w, l = trueskill_update(SkillRating(), SkillRating())
    assert w.mu == pytest.approx(29.3958, abs=1e-4)
    assert l.mu == pytest.approx(20.6042, abs=1e-4)
    assert w.sigma == pytest.approx(7.1715, abs=1e-4)
    assert l.sigma == pytest.approx(w.sigma)


def test_equal_priors_draw():
    a, b = trueskill_update(SkillRating(), SkillRating(), draw=True)
    assert a.mu == pytest.approx(25.0) and b.mu == pytest.approx(25.0)
    assert a.sigma == pytest.approx(6.4575, abs=1e-4)


def test_upset_moves_more_than_expected_win():
    strong, weak = SkillRating(35, 3), SkillRating(20, 3)
    exp_w, _ = trueskill_update(strong, weak)
    up_w, _ = trueskill_update(weak, strong)
    assert up_w.mu - weak.mu > exp_w.mu - strong.mu


@pytest.mark.parametrize("dmu", [-20.0, -5.0, 0.0, 7.5, 20.0])
@pytest.mark.parametrize("sigma", [1.0, 4.0, SIGMA0])
def test_matches_quadrature(dmu, sigma):
    p = TrueSkillParams()
    a, b = SkillRating(25 + dmu, sigma), SkillRating(25, sigma * 0.8)
    for draw in (False, True):
        na, nb = trueskill_update(a, b, draw=draw)
        outcome = "draw" if draw else "win"
        mu, sd = trueskill_posterior(a.mu, a.sigma, b.mu, b.sigma, p.beta, p.tau, p.draw_margin(), outcome)
        assert na.mu == pytest.approx(mu, abs=1e-6)
        assert na.sigma == pytest.approx(sd, abs=1e-6)
        mu, sd = trueskill_posterior(
            b.mu, b.sigma, a.mu, a.sigma, p.beta, p.tau, p.draw_margin(), "draw" if draw else "loss"
        )
        assert nb.mu == pytest.approx(mu, abs=1e-6)
        assert nb.sigma == pytest.approx(sd, abs=1e-6)


def test_extreme_upset_is_finite():
    w, l = trueskill_update(SkillRating(0, 0.5), SkillRating(100, 0.5))
    assert math.isfinite(w.mu) and math.isfinite(w.sigma) and w.sigma > 0
    d, e = trueskill_update(SkillRating(0, 0.5), SkillRating(100, 0.5), draw=True)
    assert math.isfinite(d.mu) and d.sigma > 0


def test_rating_validation():
    with pytest.raises(ValueError):
        SkillRating(25, 0)
    with pytest.raises(ValueError):
        SkillRating(float("nan"), 1)


def test_rate_match_orientation():
    a, b = SkillRating(), SkillRating()
    na, nb = rate_match(a, b, -1)
    assert na.mu < 25 < nb.mu
    na, nb = rate_match(a, b, 1)
    assert na.mu > 25 > nb.mu


@given(
    st.floats(0, 50), st.floats(0.5, 10), st.floats(0, 50), st.floats(0.5, 10), st.booleans()
)
@settings(max_examples=200)
def test_update_properties(m1, s1, m2, s2, draw):
    a, b = SkillRating(m1, s1), SkillRating(m2, s2)
    na, nb = trueskill_update(a, b, draw=draw)
    # posterior variance never exceeds prior-plus-dynamics variance
    assert na.sigma <= math.sqrt(s1**2 + TAU**2) + 1e-12
    assert nb.sigma <= math.sqrt(s2**2 + TAU**2) + 1e-12
    if not draw:
        assert na.mu >= m1 and nb.mu <= m2
    else:
        # a draw pulls both means toward each other
        assert (na.mu - m1) * (m2 - m1) >= -1e-9


def test_lcb_and_leaderboard():
    ratings = {"a": SkillRating(30, 2), "b": SkillRating(31, 4), "c": SkillRating(28, 1)}
    assert lcb_score(ratings["a"]) == 28
    assert leaderboard(ratings, 1.0) == ["a", "c", "b"]
    assert leaderboard(ratings, 0.0) == ["b", "a", "c"]
    with pytest.raises(ValueError):
        lcb_score(ratings["a"], -1)


def test_leaderboard_tie_break_on_sigma_then_id():
    ratings = {"z": SkillRating(30, 2), "y": SkillRating(29, 1), "x": SkillRating(30, 2)}
    assert leaderboard(ratings, 1.0) == ["y", "x", "z"]


def test_write_leaderboard(tmp_path):
    path = tmp_path / "lb.jsonl"
    write_leaderboard(path, {"a": SkillRating(30, 2), "b": SkillRating(20, 1)}, {"a": 5, "b": 7})
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["id"] for r in rows] == ["a", "b"]
    assert rows[0]["lcb"] == 28 and rows[1]["games"] == 7


def test_rse_values():
    assert rse([0.4, 0.5, 0.6]) == pytest.approx(11.547005383792516, abs=1e-9)
    assert rse([0.5, 0.5, 0.5]) == 0.0
    with pytest.raises(ValueError):
        rse([0.5])
    with pytest.raises(ValueError):
        rse([0.0, 0.0])


def test_tau_b_canonical():
    assert kendall_tau_b([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(1.0)
    assert kendall_tau_b([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert kendall_tau_b([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        kendall_tau_b([1, 1, 1], [1, 2, 3])


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=3, max_size=12))
@settings(max_examples=300)
def test_tau_b_matches_scipy(pairs):
    x, y = zip(*pairs)
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    expected = kendalltau(x, y, variant="b").statistic
    assert kendall_tau_b(x, y) == pytest.approx(expected, abs=1e-12)


def test_tau_b_matrix():
    rows = [[3, 1, 2], [3, 1, 2], [1, 3, 2]]
    m = tau_b_matrix(rows)
    assert m.shape == (3, 3)
    assert np.allclose(np.diag(m), 1) and np.allclose(m, m.T)
    assert m[0, 1] == 1 and m[0, 2] == pytest.approx(-1.0)
