"""Prioritized replay over trajectory prefixes.

Priorities are inverse encounter counts; sampling raises them to ``alpha`` and
normalizes. The ``beta`` gate decides whether a scheduled game resumes a stored
prefix instead of starting fresh.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass

import numpy as np

from memo.games.core import ActionRecord, TrajectoryPrefix, resume

DEFAULT_CAPACITY = 100_000
DEFAULT_ALPHA = 0.6
DEFAULT_BETA = 0.4


@dataclass
class ReplayEntry:
    prefix: TrajectoryPrefix
    count: int
    inserted_at: int

    @property
    def priority(self) -> float:
        return 1.0 / self.count

    def to_dict(self) -> dict:
        return {
            "digest": self.prefix.key,
            "game_id": self.prefix.game_id,
            "seed": self.prefix.seed,
            "actions": [r.to_dict() for r in self.prefix.steps],
            "state_digest": self.prefix.state_digest,
            "count": self.count,
            "inserted_at": self.inserted_at,
        }


class ReplayBuffer:
    def __init__(
        self,
        capacity: int = DEFAULT_CAPACITY,
        alpha: float = DEFAULT_ALPHA,
        beta: float = DEFAULT_BETA,
    ) -> None:
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0 <= beta <= 1:
            raise ValueError("beta must lie in [0, 1]")
        self.capacity = capacity
        self.alpha = alpha
        self.beta = beta
        self._entries: dict[str, ReplayEntry] = {}
        self._clock = 0
        self._lock = threading.Lock()
        self._dirty: set[str] = set()
        self._evicted: list[str] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def entries(self) -> list[ReplayEntry]:
        with self._lock:
            return sorted(self._entries.values(), key=lambda e: e.inserted_at)

    def get(self, key: str) -> ReplayEntry:
        return self._entries[key]

    def insert(self, prefix: TrajectoryPrefix) -> ReplayEntry:
        key = prefix.key
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None:
                entry.count += 1
            else:
                entry = ReplayEntry(prefix, 1, self._clock)
                self._clock += 1
                self._entries[key] = entry
                if len(self._entries) > self.capacity:
                    self._evict()
            self._dirty.add(key)
            return entry

    def _evict(self) -> None:
        # lowest priority (highest count) goes first, oldest among equals
        victim = max(self._entries.values(), key=lambda e: (e.count, -e.inserted_at))
        key = victim.prefix.key
        del self._entries[key]
        self._dirty.discard(key)
        self._evicted.append(key)

    def probabilities(self) -> tuple[list[ReplayEntry], np.ndarray]:
        entries = self.entries()
        if not entries:
            return entries, np.zeros(0)
        weights = np.array([e.priority**self.alpha for e in entries])
        return entries, weights / weights.sum()

    def sample(self, rng: np.random.Generator) -> TrajectoryPrefix:
        entries, probs = self.probabilities()
        if not entries:
            raise IndexError("cannot sample from an empty replay buffer")
        return entries[int(rng.choice(len(entries), p=probs))].prefix

    def sample_batch(self, rng: np.random.Generator, n: int) -> list[TrajectoryPrefix]:
        """``n`` independent draws from one consistent snapshot."""
        entries, probs = self.probabilities()
        if not entries:
            raise IndexError("cannot sample from an empty replay buffer")
        return [entries[i].prefix for i in rng.choice(len(entries), size=n, p=probs)]

    def should_replay(self, rng: np.random.Generator) -> bool:
        # draw u unconditionally so the rng stream does not depend on buffer size
        u = rng.random()
        return u < self.beta and len(self) > 0

    # -------------------------------------------------------------- persistence

    def flush(self, path) -> int:
        """Append records for entries changed since the last flush; returns records written."""
        with self._lock:
            lines = [json.dumps({"digest": k, "evicted": True}) for k in self._evicted]
            changed = sorted(self._dirty, key=lambda k: self._entries[k].inserted_at)
            lines.extend(json.dumps(self._entries[k].to_dict()) for k in changed)
            self._dirty.clear()
            self._evicted.clear()
        with open(path, "a", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
        return len(lines)

    @classmethod
    def load(cls, path, capacity=DEFAULT_CAPACITY, alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA):
        buf = cls(capacity, alpha, beta)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec.get("evicted"):
                    buf._entries.pop(rec["digest"], None)
                    continue
                prefix = TrajectoryPrefix(
                    rec["game_id"],
                    rec["seed"],
                    tuple(ActionRecord.from_dict(a) for a in rec["actions"]),
                    rec["state_digest"],
                )
                buf._entries[rec["digest"]] = ReplayEntry(prefix, rec["count"], rec["inserted_at"])
                buf._clock = max(buf._clock, rec["inserted_at"] + 1)
        return buf


def resume_prefix(prefix: TrajectoryPrefix):
    """Fresh game from the prefix seed with its actions re-applied; digest-checked."""
    return resume(prefix)
