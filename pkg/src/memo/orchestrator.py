"""Main optimization loop, replay-augmented tournaments and evaluation."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from memo.backend import GAME_MAX_TOKENS, BackendError, HttpBackend, ModelBackend
from memo.config import RunConfig
from memo.evolve import (
    Context,
    IdSource,
    base_context,
    final_context,
    form_next_population,
    initial_pool,
    inject_memory,
    injection_slots,
    rank_contexts,
    retain_top,
)
from memo.games import core
from memo.games.core import Step, Trajectory, TrajectoryPrefix
from memo.memory import MemoryBank
from memo.prompts import BASE_SYSTEM_PROMPT, base_prompt
from memo.rating import SkillRating, TrueSkillParams, kendall_tau_b, lcb_score, rate_match, rse
from memo.reflection import merge_insights, reflect, select_decisive_states
from memo.replay import ReplayBuffer
from memo.scripted import PLANTED_INSIGHT, scripted

log = logging.getLogger(__name__)

MAX_ABORTS = 5
BASELINE_ID = "baseline"


class RunError(RuntimeError):
    """The run cannot start or continue (bad checkpoint, repeated outages)."""


def build_backend(config: RunConfig, role: str) -> ModelBackend:
    kind = getattr(config, f"{role}_backend")
    if kind == "http":
        return HttpBackend(getattr(config, f"{role}_endpoint"), getattr(config, f"{role}_model"))
    return scripted(getattr(config, f"{role}_policy"), insight=config.planted_insight or PLANTED_INSIGHT)


def _derive_seed(*parts) -> int:
    return int(core.stable_hash(list(parts)), 16) & (2**63 - 1)


# --------------------------------------------------------------------------- games


def play_game(
    game_id: str,
    contexts: Sequence[Context],
    backends: Sequence[ModelBackend],
    seed: int,
    prefix: TrajectoryPrefix | None = None,
    invalid_retries: int = 0,
    system_base: str = BASE_SYSTEM_PROMPT,
) -> Trajectory:
    """Play one game; ``contexts[p]`` and ``backends[p]`` act for player p.

    With a prefix the game restarts from the prefix seed, re-applies its records
    (digest-checked) and continues live from there.
    """
    game = core.get_game(game_id)
    traj = Trajectory(game_id, seed)
    state = game.new_game(seed)
    if prefix is not None:
        if prefix.game_id != game_id:
            raise ValueError(f"prefix is for {prefix.game_id}, not {game_id}")
        traj.seed = prefix.seed
        state = game.new_game(prefix.seed)
        for record in prefix.steps:
            obs = game.observe(state, record.actor)
            state = core.step(state, record)
            traj.steps.append(Step(obs, record, core.state_digest(state)))
        if core.state_digest(state) != prefix.state_digest:
            raise core.DigestMismatchError(f"prefix {prefix.key} did not reproduce its state")
    while not core.is_terminal(state):
        player = game.to_move(state)
        obs = game.observe(state, player)
        messages = contexts[player].messages(obs, system_base)
        legal = core.legal_actions(state)
        for _ in range(invalid_retries + 1):
            raw = backends[player].complete(messages, GAME_MAX_TOKENS, legal=legal)
            record = core.make_record(state, raw)
            if record.valid:
                break
        state = core.step(state, record)
        traj.steps.append(Step(obs, record, core.state_digest(state)))
    traj.outcome = core.outcome(state)
    return traj


@dataclass(frozen=True)
class GameSpec:
    context: int  # index of the rated candidate
    opponent: int | None  # population index in league mode, None for the baseline
    seat: int  # candidate's player index
    seed: int
    prefix: TrajectoryPrefix | None = None


@dataclass
class TournamentResult:
    population: list[Context]
    trajectories: list[Trajectory]
    matches: list[dict]
    replayed: int
    aborted: int

    @property
    def replay_fraction(self) -> float:
        return self.replayed / len(self.matches) if self.matches else 0.0


def plan_tournament(
    n: int, games: int, buffer: ReplayBuffer, rng: np.random.Generator, league: bool = False
) -> list[GameSpec]:
    """Seeds, seats, and replay draws for every game, fixed before any game runs."""
    entries, probs = buffer.probabilities()
    specs = []
    for i in range(n):
        for j in range(games):
            seed = int(rng.integers(2**63))
            prefix = None
            if rng.random() < buffer.beta and entries:
                prefix = entries[int(rng.choice(len(entries), p=probs))].prefix
            opp = (i + 1 + (j // 2) % (n - 1)) % n if league and n > 1 else None
            specs.append(GameSpec(i, opp, j % 2, seed, prefix))
    return specs


def _run_spec(spec, population, agent, baseline, baseline_ctx, config) -> tuple[Trajectory, int]:
    cand = population[spec.context]
    opp_ctx = baseline_ctx if spec.opponent is None else population[spec.opponent]
    opp_backend = baseline if spec.opponent is None else agent
    contexts = [opp_ctx, opp_ctx]
    backends = [opp_backend, opp_backend]
    contexts[spec.seat], backends[spec.seat] = cand, agent
    seed, prefix = spec.seed, spec.prefix
    for attempt in range(MAX_ABORTS):
        try:
            return play_game(config.game_id, contexts, backends, seed, prefix, config.invalid_retries), attempt
        except BackendError as exc:
            log.warning("game aborted (%s); requeued with a fresh seed", exc)
            seed, prefix = _derive_seed(spec.seed, attempt + 1), None
    raise RunError(f"game for context {cand.id} aborted {MAX_ABORTS} times")


def run_tournament(
    population: Sequence[Context],
    config: RunConfig,
    buffer: ReplayBuffer,
    rng: np.random.Generator,
    agent: ModelBackend,
    baseline: ModelBackend,
    baseline_ctx: Context,
    baseline_rating: SkillRating | None = None,
) -> TournamentResult:
    """Every candidate plays ``games_per_candidate`` games with alternating seats.

    Games run concurrently but ratings, replay inserts and logs are applied in
    plan order, so results do not depend on ``parallelism``.
    """
    params = TrueSkillParams(draw_probability=config.draw_probability)
    baseline_rating = baseline_rating or params.prior()
    population = list(population)
    specs = plan_tournament(len(population), config.games_per_candidate, buffer, rng, config.league)
    frozen = list(population)  # contexts as assembled for play
    run = lambda s: _run_spec(s, frozen, agent, baseline, baseline_ctx, config)  # noqa: E731
    if config.parallelism > 1:
        with ThreadPoolExecutor(config.parallelism) as pool:
            results = list(pool.map(run, specs))
    else:
        results = [run(s) for s in specs]

    trajectories, matches = [], []
    replayed = aborted = 0
    tallies = [[0, 0, 0] for _ in population]
    for spec, (traj, aborts) in zip(specs, results):
        aborted += aborts
        resumed = len(spec.prefix) if spec.prefix is not None and aborts == 0 else 0
        replayed += resumed > 0
        # replayed steps count as encounters too, which lowers their priority
        for k in range(1, traj.horizon):
            buffer.insert(traj.prefix(k))
        result = traj.outcome if spec.seat == 0 else -traj.outcome
        i = spec.context
        tallies[i][{1: 0, -1: 1, 0: 2}[result]] += 1
        before = population[i].rating
        opp_id = BASELINE_ID if spec.opponent is None else population[spec.opponent].id
        if not (config.skip_draws and result == 0):
            if spec.opponent is None:
                after, _ = rate_match(before, baseline_rating, result, params)
            else:
                j = spec.opponent
                after, opp_after = rate_match(before, population[j].rating, result, params)
                population[j] = replace(population[j], rating=opp_after)
            population[i] = replace(population[i], rating=after)
        population[i] = replace(population[i], games=population[i].games + 1)
        trajectories.append(traj)
        matches.append({
            "context": population[i].id,
            "opponent": opp_id,
            "seat": spec.seat,
            "seed": traj.seed,
            "replayed_steps": resumed,
            "outcome": result,
            "before": before.to_dict(),
            "after": population[i].rating.to_dict(),
        })
    for ctx_tally, ctx in zip(tallies, population):
        log.debug("%s: %d-%d-%d", ctx.id, *ctx_tally)
    return TournamentResult(population, trajectories, matches, replayed, aborted)


# ------------------------------------------------------------------- checkpointing


def _write_json(path: Path, data) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _contexts_json(contexts: Sequence[Context]) -> list[dict]:
    return [c.to_dict() for c in contexts]


def file_digests(root) -> dict[str, str]:
    """sha256 of every file under ``root``, keyed by relative path."""
    root = Path(root)
    out = {}
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


@dataclass
class RunState:
    next_generation: int = 0
    next_id: int = 0
    replay_clock: int = 0
    replay_bytes: int = 0
    finished: bool = False


class Checkpoint:
    """Directory layout for one run."""

    def __init__(self, root) -> None:
        self.root = Path(root)
        self.config = self.root / "config.yaml"
        self.state = self.root / "state.json"
        self.pool = self.root / "pool.json"
        self.population = self.root / "population.json"
        self.memory = self.root / "memory_bank.jsonl"
        self.replay = self.root / "replay_buffer.jsonl"
        self.final = self.root / "final.json"
        self.trajectories = self.root / "trajectories"
        self.reports = self.root / "reports"

    def create(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.trajectories.mkdir(exist_ok=True)
        self.reports.mkdir(exist_ok=True)

    def report_path(self, g: int) -> Path:
        return self.reports / f"gen_{g:03d}.json"

    def trajectory_path(self, g: int) -> Path:
        return self.trajectories / f"gen_{g:03d}.jsonl"

    def read_state(self) -> RunState:
        return RunState(**json.loads(self.state.read_text(encoding="utf-8")))

    def write_state(self, state: RunState) -> None:
        _write_json(self.state, state.__dict__)

    def read_contexts(self, path: Path) -> list[Context]:
        return [Context.from_dict(d) for d in json.loads(path.read_text(encoding="utf-8"))]


# ------------------------------------------------------------------------ main loop


@dataclass
class Backends:
    agent: ModelBackend
    baseline: ModelBackend
    optimizer: ModelBackend

    @classmethod
    def from_config(cls, config: RunConfig) -> Backends:
        return cls(*(build_backend(config, r) for r in ("agent", "baseline", "optimizer")))


def _rng(seed: int, g: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, g, stream]))


INIT_STREAM, INJECT_STREAM, PLAY_STREAM, PROPOSE_STREAM = range(4)


def run_memo(
    config: RunConfig | None,
    out_dir,
    resume: bool = False,
    backends: Backends | None = None,
    stop_after: int | None = None,
    on_generation: Callable[[dict], None] | None = None,
) -> Context | None:
    """Run (or resume) the optimization loop and return the best pool context.

    ``stop_after`` ends the process after that many generations have been
    checkpointed, as a kill would; None is returned in that case.
    """
    ckpt = Checkpoint(out_dir)
    if resume:
        if not ckpt.state.exists():
            raise RunError(f"{ckpt.root} holds no checkpoint to resume")
        from memo.config import load_config

        saved = load_config(ckpt.config)
        if config is not None and config.to_dict() != saved.to_dict():
            raise RunError("configuration differs from the checkpointed one")
        config = saved
        state = ckpt.read_state()
        bank = MemoryBank.load(config.game_id, ckpt.memory)
        with open(ckpt.replay, "r+b") as fh:
            fh.truncate(state.replay_bytes)  # drop records from an interrupted generation
        buffer = ReplayBuffer.load(ckpt.replay, config.replay_capacity, config.replay_alpha, config.replay_beta)
        buffer._clock = state.replay_clock
        pool = ckpt.read_contexts(ckpt.pool)
        population = ckpt.read_contexts(ckpt.population)
        ids = IdSource(state.next_id)
    else:
        if config is None:
            raise RunError("a configuration is required for a fresh run")
        if ckpt.state.exists():
            raise RunError(f"{ckpt.root} already holds a run; resume it or pick another directory")
        config.validate()
        ckpt.create()
        config.save(ckpt.config)
        state = RunState()
        bank = MemoryBank(config.game_id)
        buffer = ReplayBuffer(config.replay_capacity, config.replay_alpha, config.replay_beta)
        ckpt.replay.touch()
        ids = IdSource()
        backends = backends or Backends.from_config(config)
        pool = initial_pool(
            backends.optimizer, config.game_id, config.population_size,
            _rng(config.seed, 0, INIT_STREAM), ids, config.length_budget,
        )
        population = list(pool)
        bank.save(ckpt.memory)

    backends = backends or Backends.from_config(config)
    base = base_context(config.game_id, "c0000")
    baseline_ctx = Context(BASELINE_ID, base_prompt(config.game_id))
    n = config.population_size

    for g in range(state.next_generation, config.generations):
        slots = injection_slots(n, config.memory_fraction, _rng(config.seed, g, INJECT_STREAM))
        population = inject_memory(
            population, bank, config.memory_fraction, config.memory_subset,
            _rng(config.seed, g, INJECT_STREAM),
        )
        rating_before = {c.id: c.rating.to_dict() for c in population}
        result = run_tournament(
            population, config, buffer, _rng(config.seed, g, PLAY_STREAM),
            backends.agent, backends.baseline, baseline_ctx,
        )
        population = result.population
        decisive = select_decisive_states(result.trajectories, config.reflection_states)
        insights = [t for t in (reflect(backends.optimizer, s) for s in decisive) if t]
        merge = merge_insights(backends.optimizer, bank, insights, g)
        pool = retain_top(pool, population, 2 * n, config.kappa)

        report = {
            "generation": g,
            "games": len(result.matches),
            "aborted": result.aborted,
            "replay_fraction": result.replay_fraction,
            "injected": [population[i].id for i in slots],
            "population": [
                {
                    **c.to_dict(),
                    "rating_before": rating_before[c.id],
                    "score": lcb_score(c.rating, config.kappa),
                    "wins": sum(m["outcome"] == 1 for m in result.matches if m["context"] == c.id),
                    "losses": sum(m["outcome"] == -1 for m in result.matches if m["context"] == c.id),
                    "draws": sum(m["outcome"] == 0 for m in result.matches if m["context"] == c.id),
                }
                for c in population
            ],
            "matches": result.matches,
            "decisive_states": [
                {"digest": s.digest, "wins": s.wins, "losses": s.losses, "draws": s.draws}
                for s in decisive
            ],
            "insights": insights,
            "memory": merge.to_dict(),
            "memory_size": len(bank),
            "pool": [
                {"id": c.id, "mu": c.rating.mu, "sigma": c.rating.sigma, "score": c.score(config.kappa)}
                for c in pool
            ],
        }
        if g + 1 < config.generations:
            population, proposals = form_next_population(
                pool, n, config.random_ratio, backends.optimizer, bank, base,
                _rng(config.seed, g, PROPOSE_STREAM), ids, config.game_id,
                config.kappa, config.length_budget, config.proposal_lessons,
            )
            report["proposals"] = _contexts_json(proposals)
            report["next_population"] = [c.id for c in population]

        ckpt.trajectory_path(g).unlink(missing_ok=True)
        core.write_trajectories(ckpt.trajectory_path(g), result.trajectories)
        _write_json(ckpt.report_path(g), report)
        bank.save(ckpt.memory)
        buffer.flush(ckpt.replay)
        _write_json(ckpt.pool, _contexts_json(pool))
        _write_json(ckpt.population, _contexts_json(population))
        state = RunState(g + 1, ids.next, buffer._clock, ckpt.replay.stat().st_size)
        ckpt.write_state(state)
        log.info("generation %d: %d games, memory %d, best %s", g, len(result.matches), len(bank), pool[0].id)
        if on_generation is not None:
            on_generation(report)
        if stop_after is not None and g + 1 >= stop_after and g + 1 < config.generations:
            return None

    best = final_context(pool, config.kappa)
    _write_json(ckpt.final, {"context": best.to_dict(), "score": best.score(config.kappa)})
    state.finished = True
    ckpt.write_state(state)
    return best


def load_final(out_dir) -> Context:
    data = json.loads(Checkpoint(out_dir).final.read_text(encoding="utf-8"))
    return Context.from_dict(data["context"])


# ----------------------------------------------------------------------- evaluation


@dataclass
class Opponent:
    name: str
    backend: ModelBackend
    context: Context


@dataclass
class EvalReport:
    opponents: list[str]
    win_rates: list[dict[str, float]]  # one mapping per run
    run_means: list[float]
    games_per_run: int
    mean: float = 0.0
    rse: float | None = None

    def to_dict(self) -> dict:
        return {
            "opponents": self.opponents,
            "win_rates": self.win_rates,
            "run_means": self.run_means,
            "games_per_run": self.games_per_run,
            "mean": self.mean,
            "rse": self.rse,
        }


def evaluate(
    game_id: str,
    context: Context,
    agent: ModelBackend,
    opponents: Sequence[Opponent],
    games_per_opponent: int = 50,
    runs: int = 1,
    seed: int = 0,
    parallelism: int = 1,
) -> EvalReport:
    """Win rates against each opponent with alternating seats; RSE across runs."""
    if not opponents:
        raise ValueError("need at least one opponent")
    if games_per_opponent < 1 or runs < 1:
        raise ValueError("games_per_opponent and runs must be positive")
    win_rates, means = [], []
    for r in range(runs):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        jobs = []
        for opp in opponents:
            for j in range(games_per_opponent):
                seat = j % 2
                ctxs = [opp.context, opp.context]
                bks = [opp.backend, opp.backend]
                ctxs[seat], bks[seat] = context, agent
                jobs.append((opp.name, seat, ctxs, bks, int(rng.integers(2**63))))

        def run(job):
            _, seat, ctxs, bks, s = job
            traj = play_game(game_id, ctxs, bks, s)
            return traj.outcome if seat == 0 else -traj.outcome

        if parallelism > 1:
            with ThreadPoolExecutor(parallelism) as ex:
                results = list(ex.map(run, jobs))
        else:
            results = [run(j) for j in jobs]
        wins: dict[str, int] = {o.name: 0 for o in opponents}
        for job, res in zip(jobs, results):
            wins[job[0]] += res == 1
        rates = {name: w / games_per_opponent for name, w in wins.items()}
        win_rates.append(rates)
        means.append(sum(wins.values()) / len(jobs))
    report = EvalReport([o.name for o in opponents], win_rates, means, games_per_opponent * len(opponents))
    report.mean = sum(means) / runs
    if runs >= 2 and report.mean > 0:
        report.rse = rse(means)
    return report


# ---------------------------------------------------------------------- sensitivity


@dataclass
class SensitivityReport:
    variants: list[str]
    agents: list[str]
    scores: list[list[float]]  # [variant][agent]
    tau: list[list[float]]

    def leaderboard(self, v: int) -> list[str]:
        row = self.scores[v]
        return [self.agents[i] for i in sorted(range(len(row)), key=lambda i: (-row[i], self.agents[i]))]

    def to_dict(self) -> dict:
        return {
            "variants": self.variants,
            "agents": self.agents,
            "scores": self.scores,
            "leaderboards": {v: self.leaderboard(i) for i, v in enumerate(self.variants)},
            "tau_b": self.tau,
        }


def round_robin(
    game_id: str,
    agents: Sequence[tuple[str, ModelBackend]],
    system_base: str,
    games_per_pair: int,
    seed: int,
    kappa: float = 1.0,
) -> dict[str, SkillRating]:
    """Every pair plays ``games_per_pair`` games with alternating seats."""
    params = TrueSkillParams()
    ratings = {name: params.prior() for name, _ in agents}
    ctx = Context("variant", base_prompt(game_id))
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    for a in range(len(agents)):
        for b in range(a + 1, len(agents)):
            (na, ba), (nb, bb) = agents[a], agents[b]
            for j in range(games_per_pair):
                s = int(rng.integers(2**63))
                bks = [ba, bb] if j % 2 == 0 else [bb, ba]
                traj = play_game(game_id, [ctx, ctx], bks, s, system_base=system_base)
                result = traj.outcome if j % 2 == 0 else -traj.outcome
                ratings[na], ratings[nb] = rate_match(ratings[na], ratings[nb], result, params)
    return ratings


def sensitivity(
    game_id: str,
    variants: Sequence[tuple[str, str]],
    agents: Sequence[tuple[str, ModelBackend]],
    games_per_pair: int = 10,
    seed: int = 0,
    kappa: float = 1.0,
) -> SensitivityReport:
    """Round-robin under each prompt variant and pairwise tau_b of the leaderboards."""
    if len(variants) < 2:
        raise ValueError("sensitivity analysis needs at least two prompt variants")
    if len(agents) < 2:
        raise ValueError("sensitivity analysis needs at least two agents")
    scores = []
    for _, text in variants:
        ratings = round_robin(game_id, agents, text, games_per_pair, seed, kappa)
        scores.append([lcb_score(ratings[name], kappa) for name, _ in agents])
    k = len(variants)
    tau = [[1.0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            try:
                t = kendall_tau_b(scores[i], scores[j])
            except ValueError:
                t = 1.0 if scores[i] == scores[j] else float("nan")
            tau[i][j] = tau[j][i] = t
    return SensitivityReport([v for v, _ in variants], [a for a, _ in agents], scores, tau)


def leaderboard_rows(contexts: Sequence[Context], kappa: float = 1.0) -> list[dict]:
    return [
        {"rank": r, "id": c.id, "mu": c.rating.mu, "sigma": c.rating.sigma,
         "score": c.score(kappa), "lineage": c.lineage, "games": c.games}
        for r, c in enumerate(rank_contexts(contexts, kappa), start=1)
    ]
