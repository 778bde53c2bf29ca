"""Command-line entry point: ``memo <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import yaml

from memo.backend import BackendError, HttpBackend, ModelBackend
from memo.config import ConfigError, RunConfig, load_config, parse_overrides
from memo.evolve import Context
from memo.games import GAME_IDS
from memo.memory import MemoryBank
from memo.orchestrator import (
    BASELINE_ID,
    Checkpoint,
    Opponent,
    RunError,
    evaluate,
    leaderboard_rows,
    run_memo,
    sensitivity,
)
from memo.prompts import base_prompt
from memo.replay import ReplayBuffer
from memo.scripted import PLANTED_INSIGHT, scripted

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj, path: Path | None) -> None:
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _table(rows: list[dict], columns: list[str]) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.4f}"
        return "-" if v is None else str(v)

    cells = [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _config(args) -> RunConfig:
    overrides = parse_overrides(args.set)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "parallelism", None) is not None:
        overrides["parallelism"] = args.parallelism
    return load_config(args.config, overrides)


def _backend_from_spec(spec: dict, where: str) -> ModelBackend:
    kind = spec.get("backend", "scripted")
    if kind == "scripted":
        policy = spec.get("policy")
        if not policy:
            raise ConfigError([f"{where}: scripted backend needs a policy"])
        try:
            return scripted(policy, insight=spec.get("insight", PLANTED_INSIGHT))
        except ValueError as exc:
            raise ConfigError([f"{where}: {exc}"]) from exc
    if kind == "http":
        missing = [k for k in ("endpoint", "model") if not spec.get(k)]
        if missing:
            raise ConfigError([f"{where}: http backend needs {', '.join(missing)}"])
        return HttpBackend(spec["endpoint"], spec["model"])
    raise ConfigError([f"{where}: unknown backend {kind!r}"])


def _players(path, key: str) -> list[dict]:
    if path is None:
        raise ConfigError([f"--{key} file is required"])
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    items = data.get(key) if isinstance(data, dict) else None
    if not items or not isinstance(items, list):
        raise ConfigError([f"{path}: expected a non-empty '{key}' list"])
    for n, item in enumerate(items):
        if not isinstance(item, dict) or not item.get("name"):
            raise ConfigError([f"{path}: {key}[{n}] needs a name"])
    return items


def _load_context(path) -> Context:
    path = Path(path)
    if path.is_dir():
        path = Checkpoint(path).final
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    try:
        return Context.from_dict(data.get("context", data))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError([f"{path}: not a context file ({exc})"]) from exc


# ---------------------------------------------------------------------- commands


def cmd_optimize(args) -> int:
    out = Path(args.out)
    if args.resume:
        config = None
        if args.config or args.set:
            config = _config(args)
    else:
        config = _config(args)
        print(
            f"self-play budget: {config.population_size} x {config.generations} x "
            f"{config.games_per_candidate} = {config.budget} games"
        )
    best = run_memo(config, out, resume=args.resume)
    pool = Checkpoint(out).read_contexts(Checkpoint(out).pool)
    kappa = load_config(Checkpoint(out).config).kappa
    rows = leaderboard_rows(pool, kappa)
    _emit(rows, out / "leaderboard.json")
    print(f"final context: {best.id} (score {best.score(kappa):.4f})")
    print(best.assembled())
    print()
    print(_table(rows, ["rank", "id", "mu", "sigma", "score", "lineage", "games"]))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _config(args)
    context = _load_context(args.context)
    opponents = []
    for n, spec in enumerate(_players(args.opponents, "opponents")):
        backend = _backend_from_spec(spec, f"opponents[{n}]")
        prompt = spec.get("prompt") or base_prompt(config.game_id)
        opponents.append(Opponent(spec["name"], backend, Context(BASELINE_ID, prompt)))
    agent = _backend_from_spec(
        {"backend": config.agent_backend, "policy": config.agent_policy,
         "endpoint": config.agent_endpoint, "model": config.agent_model,
         "insight": config.planted_insight or PLANTED_INSIGHT},
        "agent",
    )
    runs = args.runs or config.eval_runs
    games = args.games or config.eval_games
    report = evaluate(config.game_id, context, agent, opponents, games, runs, config.seed, config.parallelism)
    rows = []
    for name in report.opponents:
        row = {"opponent": name}
        for r, rates in enumerate(report.win_rates, start=1):
            row[f"run{r}"] = rates[name]
        rows.append(row)
    print(_table(rows, ["opponent"] + [f"run{r}" for r in range(1, runs + 1)]))
    print("run means: " + " ".join(f"{x:.4f}" for x in report.run_means))
    print(f"mean: {report.mean:.4f}")
    print("rse: undefined (fewer than 2 runs)" if report.rse is None else f"rse: {report.rse:.4f}%")
    if args.out:
        _emit(report.to_dict(), Path(args.out) / "evaluation.json")
    return EXIT_OK


def cmd_rank(args) -> int:
    path = Path(args.pool)
    if path.is_dir():
        path = Checkpoint(path).pool
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        contexts = [Context.from_dict(d) for d in data]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    rows = leaderboard_rows(contexts, args.kappa)
    print(_table(rows, ["rank", "id", "mu", "sigma", "score", "lineage", "games"]))
    if args.out:
        _emit(rows, Path(args.out) / "leaderboard.json")
    return EXIT_OK


def cmd_replay_inspect(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = Checkpoint(path).replay
    if not path.exists():
        raise ConfigError([f"{path}: no such replay file"])
    buf = ReplayBuffer.load(path, alpha=args.alpha)
    entries, probs = buf.probabilities()
    order = sorted(range(len(entries)), key=lambda i: (-probs[i], entries[i].inserted_at))
    rows = [
        {"digest": entries[i].prefix.key, "game": entries[i].prefix.game_id,
         "length": len(entries[i].prefix), "count": entries[i].count, "p": float(probs[i])}
        for i in order[: args.top]
    ]
    counts = [e.count for e in entries]
    summary = {
        "entries": len(entries),
        "total_count": sum(counts),
        "max_count": max(counts, default=0),
        "top": rows,
    }
    print(f"entries: {summary['entries']}  encounters: {summary['total_count']}  max count: {summary['max_count']}")
    if rows:
        print(_table(rows, ["digest", "game", "length", "count", "p"]))
    if args.out:
        _emit(summary, Path(args.out) / "replay_summary.json")
    return EXIT_OK


def cmd_memory_inspect(args) -> int:
    path = Path(args.path)
    game_id = args.game
    if path.is_dir():
        ckpt = Checkpoint(path)
        path = ckpt.memory
        if game_id is None and ckpt.config.exists():
            game_id = load_config(ckpt.config).game_id
    if not path.exists():
        raise ConfigError([f"{path}: no such memory file"])
    bank = MemoryBank.load(game_id or "unknown", path)
    rows = [
        {"n": n, "kind": ins.kind.value, "gen": ins.source_generation, "revisions": ins.revisions, "text": ins.text}
        for n, ins in enumerate(bank, start=1)
    ]
    print(f"{len(bank)} insights")
    if rows:
        print(_table(rows, ["n", "kind", "gen", "revisions", "text"]))
    if args.out:
        _emit(rows, Path(args.out) / "memory.json")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    config = _config(args)
    folder = Path(args.variants)
    if not folder.is_dir():
        raise ConfigError([f"{folder}: not a directory"])
    variants = [(p.stem, p.read_text(encoding="utf-8").strip()) for p in sorted(folder.glob("*.txt"))]
    if len(variants) < 2:
        raise ConfigError([f"{folder}: need at least two *.txt prompt variants, found {len(variants)}"])
    agents = [
        (spec["name"], _backend_from_spec(spec, f"agents[{n}]"))
        for n, spec in enumerate(_players(args.agents, "agents"))
    ]
    if len(agents) < 2:
        raise ConfigError([f"{args.agents}: need at least two agents"])
    report = sensitivity(config.game_id, variants, agents, args.games, config.seed, config.kappa)
    for v, name in enumerate(report.variants):
        print(f"{name}: " + " > ".join(report.leaderboard(v)))
    print()
    rows = [{"variant": name, **{report.variants[j]: report.tau[i][j] for j in range(len(report.variants))}}
            for i, name in enumerate(report.variants)]
    print(_table(rows, ["variant"] + report.variants))
    if args.out:
        out = Path(args.out)
        _emit(report.to_dict(), out / "sensitivity.json")
        with open(out / "tau_b.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + report.variants)
            for name, row in zip(report.variants, report.tau):
                writer.writerow([name] + [f"{t:.6f}" for t in row])
    return EXIT_OK


# ------------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memo", description="Self-play context optimization for two-player text games.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_options(p, out_default=None, resume=False):
        p.add_argument("--config", help="YAML key-value run configuration")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration field (repeatable)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--parallelism", type=int, help="games in flight at once")
        p.add_argument("--out", default=out_default, help="output directory")
        if resume:
            p.add_argument("--resume", action="store_true", help="continue the run checkpointed in --out")

    p = sub.add_parser("optimize", help="run the optimization loop")
    run_options(p, "memo_run", resume=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="evaluate a context against opponents")
    run_options(p)
    p.add_argument("--context", required=True, help="context JSON (final.json) or checkpoint dir")
    p.add_argument("--opponents", required=True, help="YAML file with an 'opponents' list")
    p.add_argument("--runs", type=int, help="independent runs (default: eval_runs)")
    p.add_argument("--games", type=int, help="games per opponent per run (default: eval_games)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", help="leaderboard of a candidate pool")
    p.add_argument("pool", help="pool.json or checkpoint dir")
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("replay-inspect", help="summarize a replay buffer file")
    p.add_argument("path", help="replay_buffer.jsonl or checkpoint dir")
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay_inspect)

    p = sub.add_parser("memory-inspect", help="list a memory bank")
    p.add_argument("path", help="memory_bank.jsonl or checkpoint dir")
    p.add_argument("--game", choices=GAME_IDS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_memory_inspect)

    p = sub.add_parser("sensitivity", help="leaderboard stability across prompt variants")
    run_options(p)
    p.add_argument("--variants", required=True, help="directory of *.txt system prompt variants")
    p.add_argument("--agents", required=True, help="YAML file with an 'agents' list")
    p.add_argument("--games", type=int, default=10, help="games per agent pair")
    p.set_defaults(func=cmd_sensitivity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except (RunError, BackendError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
