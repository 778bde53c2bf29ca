"""Persistent insight bank with add / edit / remove merges."""

from __future__ import annotations

import copy
import enum
import json
import logging
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SOFT_CAP = 50
HARD_CAP = 100
DEFAULT_SUBSET = 10

MEMORY_HEADER = "Insights from previous games:"


class InsightKind(str, enum.Enum):
    RULE_CLARIFICATION = "rule_clarification"
    LEGALITY_CONSTRAINT = "legality_constraint"
    STRATEGY_PRIOR = "strategy_prior"
    OTHER = "other"


_KIND_CUES = (
    (InsightKind.LEGALITY_CONSTRAINT, ("illegal", "invalid", "not allowed", "only legal", "format")),
    (InsightKind.RULE_CLARIFICATION, ("rule", "the game ends", "scoring", "points are")),
    (InsightKind.STRATEGY_PRIOR, ("should", "prefer", "avoid", "always", "never", "strategy")),
)


def classify_insight(text: str) -> InsightKind:
    lowered = text.lower()
    for kind, cues in _KIND_CUES:
        if any(cue in lowered for cue in cues):
            return kind
    return InsightKind.OTHER


def normalize_text(text: str) -> str:
    return " ".join(text.split())


@dataclass
class Insight:
    text: str
    kind: InsightKind = InsightKind.OTHER
    source_generation: int = 0
    revisions: int = 0

    def __post_init__(self) -> None:
        self.text = normalize_text(self.text)
        if not self.text:
            raise ValueError("insight text must be non-empty")
        self.kind = InsightKind(self.kind)


@dataclass(frozen=True)
class Add:
    text: str


@dataclass(frozen=True)
class Edit:
    number: int
    text: str


@dataclass(frozen=True)
class Remove:
    number: int
    reason: str = ""


MemoryOp = Add | Edit | Remove


@dataclass
class MergeReport:
    added: list[str] = field(default_factory=list)
    edited: list[int] = field(default_factory=list)
    removed: list[int] = field(default_factory=list)
    rejected: list[str] = field(default_factory=list)
    evicted: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "added": self.added,
            "edited": self.edited,
            "removed": self.removed,
            "rejected": self.rejected,
            "evicted": self.evicted,
        }


class MemoryBank:
    """Ordered insights for one game; display numbering is 1-based position."""

    def __init__(self, game_id: str, insights: Iterable[Insight] = (), hard_cap: int = HARD_CAP):
        self.game_id = game_id
        self.insights: list[Insight] = list(insights)
        self.hard_cap = hard_cap
        self.last_report: MergeReport | None = None

    def __len__(self) -> int:
        return len(self.insights)

    def __iter__(self):
        return iter(self.insights)

    def texts(self) -> list[str]:
        return [i.text for i in self.insights]

    def numbered(self) -> str:
        """Library listing as shown to the merge model."""
        if not self.insights:
            return "(empty)"
        return "\n".join(f"{n}. {i.text}" for n, i in enumerate(self.insights, start=1))

    def merge(self, ops: Sequence[MemoryOp], generation: int = 0) -> MergeReport:
        """Apply a batch of ops, resolving numbers against the current snapshot."""
        report = MergeReport()
        size = len(self.insights)
        edits: dict[int, str] = {}
        removals: set[int] = set()
        adds: list[str] = []
        for op in ops:
            if isinstance(op, Add):
                if normalize_text(op.text):
                    adds.append(op.text)
                else:
                    report.rejected.append("add with empty text")
                continue
            if not 1 <= op.number <= size:
                msg = f"{type(op).__name__.lower()} references #{op.number}; library has {size}"
                report.rejected.append(msg)
                log.warning("memory op rejected: %s", msg)
                continue
            if isinstance(op, Edit):
                if normalize_text(op.text):
                    edits[op.number] = op.text
                else:
                    report.rejected.append(f"edit #{op.number} with empty text")
            else:
                removals.add(op.number)

        kept: list[Insight] = []
        for number, insight in enumerate(self.insights, start=1):
            if number in removals:
                report.removed.append(number)
                continue
            if number in edits:
                insight = Insight(
                    edits[number],
                    classify_insight(edits[number]),
                    insight.source_generation,
                    insight.revisions + 1,
                )
                report.edited.append(number)
            kept.append(insight)
        for text in adds:
            kept.append(Insight(text, classify_insight(text), generation))
            report.added.append(normalize_text(text))
        while len(kept) > self.hard_cap:
            # oldest generation first, then least revised
            victim = min(
                range(len(kept)),
                key=lambda i: (kept[i].source_generation, kept[i].revisions, i),
            )
            report.evicted.append(kept.pop(victim).text)
        self.insights = kept
        self.last_report = report
        return report

    # ------------------------------------------------------------- persistence

    def dumps(self) -> str:
        lines = [
            json.dumps(
                {
                    "index": n,
                    "kind": i.kind.value,
                    "text": i.text,
                    "source_generation": i.source_generation,
                    "revisions": i.revisions,
                },
                ensure_ascii=False,
            )
            for n, i in enumerate(self.insights, start=1)
        ]
        return "".join(line + "\n" for line in lines)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, game_id: str, text: str) -> MemoryBank:
        insights = []
        for line in text.splitlines():
            if line.strip():
                rec = json.loads(line)
                insights.append(
                    Insight(rec["text"], rec["kind"], rec["source_generation"], rec["revisions"])
                )
        return cls(game_id, insights)

    @classmethod
    def load(cls, game_id: str, path) -> MemoryBank:
        with open(path, encoding="utf-8") as fh:
            return cls.loads(game_id, fh.read())


def apply_ops(bank: MemoryBank, ops: Sequence[MemoryOp], generation: int = 0) -> MemoryBank:
    """Functional form of :meth:`MemoryBank.merge`; the input bank is left untouched."""
    out = copy.deepcopy(bank)
    out.merge(ops, generation)
    return out


# ------------------------------------------------------------------------- parsing

_OPEN = re.compile(r"<\s*(add|edit|remove)\b([^>]*)>", re.IGNORECASE)
_NUMBER = re.compile(r"""number\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'>]+))""", re.IGNORECASE)


def parse_memory_ops(response: str) -> tuple[list[MemoryOp], list[str]]:
    """Extract add/edit/remove tags in document order.

    Returns the parsed ops and a list of diagnostics for tags that were skipped.
    """
    ops: list[MemoryOp] = []
    diagnostics: list[str] = []
    text = response or ""
    pos = 0
    while True:
        m = _OPEN.search(text, pos)
        if m is None:
            break
        tag = m.group(1).lower()
        close = re.compile(rf"<\s*/\s*{tag}\s*>", re.IGNORECASE).search(text, m.end())
        if close is None:
            diagnostics.append(f"unclosed <{tag}> at offset {m.start()}")
            pos = m.end()
            continue
        body = text[m.start() + len(m.group(0)) : close.start()].strip()
        pos = close.end()
        if tag == "add":
            if body:
                ops.append(Add(body))
            else:
                diagnostics.append(f"empty <add> at offset {m.start()}")
            continue
        attr = _NUMBER.search(m.group(2))
        raw = next((g for g in attr.groups() if g is not None), "") if attr else None
        if raw is None or not re.fullmatch(r"[0-9]+", raw.strip()) or int(raw) < 1:
            diagnostics.append(f"<{tag}> at offset {m.start()} has bad number {raw!r}")
            continue
        number = int(raw)
        if tag == "edit":
            if body:
                ops.append(Edit(number, body))
            else:
                diagnostics.append(f"empty <edit number={number}>")
        else:
            ops.append(Remove(number, body))
    if not ops and text.strip() and not diagnostics:
        diagnostics.append("no memory operations found")
    return ops, diagnostics


# ---------------------------------------------------------------- injection & render


def subsample(bank: MemoryBank, k: int, rng: np.random.Generator) -> list[Insight]:
    """Uniform subset of size min(k, |bank|) without replacement, bank order preserved."""
    if k < 0:
        raise ValueError("k must be non-negative")
    n = len(bank)
    if k >= n:
        return list(bank.insights)
    chosen = sorted(int(i) for i in rng.choice(n, size=k, replace=False))
    return [bank.insights[i] for i in chosen]


def render_memory(insights: Sequence[Insight | str]) -> str:
    if not insights:
        return ""
    texts = [i.text if isinstance(i, Insight) else normalize_text(i) for i in insights]
    return "\n".join([MEMORY_HEADER] + [f"{n}. {t}" for n, t in enumerate(texts, start=1)])


def parse_rendered(block: str) -> list[str]:
    """Inverse of :func:`render_memory`."""
    lines = block.splitlines()
    if not lines or lines[0] != MEMORY_HEADER:
        return []
    out = []
    for n, line in enumerate(lines[1:], start=1):
        prefix = f"{n}. "
        if not line.startswith(prefix):
            raise ValueError(f"malformed memory line {line!r}")
        out.append(line[len(prefix):])
    return out
