"""Two-player TrueSkill, conservative scoring, and run-stability statistics."""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

MU0 = 25.0
SIGMA0 = MU0 / 3
BETA = SIGMA0 / 2
TAU = SIGMA0 / 100
DRAW_PROBABILITY = 0.10

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SkillRating:
    mu: float = MU0
    sigma: float = SIGMA0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError(f"non-finite rating ({self.mu}, {self.sigma})")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class MatchResult:
    context_a: str
    context_b: str
    outcome: int  # from context_a's perspective

    def __post_init__(self) -> None:
        if self.outcome not in (-1, 0, 1):
            raise ValueError(f"outcome must be -1, 0 or 1, got {self.outcome}")


@dataclass(frozen=True)
class TrueSkillParams:
    mu: float = MU0
    sigma: float = SIGMA0
    beta: float = BETA
    tau: float = TAU
    draw_probability: float = DRAW_PROBABILITY

    def prior(self) -> SkillRating:
        return SkillRating(self.mu, self.sigma)

    def draw_margin(self) -> float:
        """Performance-difference margin inside which a game counts as drawn."""
        if self.draw_probability <= 0:
            return 0.0
        return NormalDist().inv_cdf((self.draw_probability + 1) / 2) * _SQRT2 * self.beta


DEFAULT_PARAMS = TrueSkillParams()


# ----------------------------------------------------------------- Gaussian helpers


def _pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _cdf(x: float) -> float:
    # erfc keeps relative precision in the far left tail
    return 0.5 * math.erfc(-x / _SQRT2)


def _mills_ratio(x: float) -> float:
    """pdf(x) / cdf(x), stable for large negative x."""
    if x > -30.0:
        return _pdf(x) / _cdf(x)
    # asymptotic expansion of pdf/cdf as x -> -inf
    z = -x
    return z + 1.0 / z - 2.0 / z**3 + 10.0 / z**5


def v_win(t: float, eps: float) -> float:
    return _mills_ratio(t - eps)


def w_win(t: float, eps: float) -> float:
    v = v_win(t, eps)
    return v * (v + t - eps)


def _draw_terms(t: float, eps: float) -> tuple[float, float]:
    """(v, w) for a draw; v is odd and w even in t, so work with |t|."""
    lo, hi = -eps - abs(t), eps - abs(t)
    mass = _cdf(hi) - _cdf(lo)
    if mass < 1e-300:
        # both bounds deep in the left tail
        v, w = hi, 1.0
    else:
        v = (_pdf(lo) - _pdf(hi)) / mass
        w = v * v + (hi * _pdf(hi) - lo * _pdf(lo)) / mass
    return (v if t >= 0 else -v), w


def v_draw(t: float, eps: float) -> float:
    return _draw_terms(t, eps)[0]


def w_draw(t: float, eps: float) -> float:
    return _draw_terms(t, eps)[1]


# ------------------------------------------------------------------------ updating


def trueskill_update(
    winner: SkillRating,
    loser: SkillRating,
    draw: bool = False,
    params: TrueSkillParams = DEFAULT_PARAMS,
) -> tuple[SkillRating, SkillRating]:
    """Posterior ratings after one game; with ``draw`` the argument order is irrelevant."""
    var_w = winner.sigma**2 + params.tau**2
    var_l = loser.sigma**2 + params.tau**2
    c2 = var_w + var_l + 2 * params.beta**2
    c = math.sqrt(c2)
    t = (winner.mu - loser.mu) / c
    eps = params.draw_margin() / c
    if draw:
        v, w = _draw_terms(t, eps)
    else:
        v, w = v_win(t, eps), w_win(t, eps)
    new_w = SkillRating(winner.mu + var_w / c * v, math.sqrt(var_w * (1 - var_w / c2 * w)))
    new_l = SkillRating(loser.mu - var_l / c * v, math.sqrt(var_l * (1 - var_l / c2 * w)))
    return new_w, new_l


def rate_match(
    a: SkillRating, b: SkillRating, outcome: int, params: TrueSkillParams = DEFAULT_PARAMS
) -> tuple[SkillRating, SkillRating]:
    """Update (a, b) for an outcome given from a's perspective."""
    if outcome > 0:
        return trueskill_update(a, b, params=params)
    if outcome < 0:
        new_b, new_a = trueskill_update(b, a, params=params)
        return new_a, new_b
    return trueskill_update(a, b, draw=True, params=params)


def lcb_score(rating: SkillRating, kappa: float = 1.0) -> float:
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return rating.mu - kappa * rating.sigma


def leaderboard(ratings: Mapping[str, SkillRating], kappa: float = 1.0) -> list[str]:
    """Ids by descending lower-confidence score, then lower sigma, then id."""
    return sorted(ratings, key=lambda k: (-lcb_score(ratings[k], kappa), ratings[k].sigma, k))


def write_leaderboard(
    path,
    ratings: Mapping[str, SkillRating],
    games: Mapping[str, int] | None = None,
    kappa: float = 1.0,
) -> list[dict]:
    rows = [
        {
            "id": cid,
            "mu": ratings[cid].mu,
            "sigma": ratings[cid].sigma,
            "lcb": lcb_score(ratings[cid], kappa),
            "games": (games or {}).get(cid, 0),
        }
        for cid in leaderboard(ratings, kappa)
    ]
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return rows


# ---------------------------------------------------------------------- statistics


def rse(values: Sequence[float]) -> float:
    """Relative standard error in percent: 100 * std / (mean * sqrt(n)), std with n-1."""
    n = len(values)
    if n < 2:
        raise ValueError("RSE needs at least two runs")
    mean = sum(values) / n
    if mean == 0:
        raise ValueError("RSE is undefined for a zero mean")
    std = math.sqrt(sum((x - mean) ** 2 for x in values) / (n - 1))
    return 100.0 * std / (mean * math.sqrt(n))


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected Kendall rank correlation."""
    n = len(x)
    if n != len(y) or n < 2:
        raise ValueError("rankings must have equal length >= 2")
    concordant = discordant = ties_x_only = ties_y_only = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            if dx and dy:
                if dx == dy:
                    concordant += 1
                else:
                    discordant += 1
            elif dx:
                ties_y_only += 1
            elif dy:
                ties_x_only += 1
    denom = math.sqrt(
        (concordant + discordant + ties_y_only) * (concordant + discordant + ties_x_only)
    )
    if denom == 0:
        raise ValueError("tau_b is undefined when one ranking is entirely tied")
    return (concordant - discordant) / denom


def tau_b_matrix(scores: Sequence[Sequence[float]]) -> np.ndarray:
    """Pairwise tau_b between score vectors (one vector per prompt variant)."""
    k = len(scores)
    out = np.ones((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = kendall_tau_b(scores[i], scores[j])
    return out
