"""Budgeted context memory with class-based expiry and scored eviction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embed import ContextToken, Tag, TTLClass

# slack for comparing ages built from accumulated float time steps
AGE_TOL = 1e-9

DEFAULT_TTL = {TTLClass.STATIC: math.inf, TTLClass.SLOW: 1.0, TTLClass.FAST: 0.1}
# fresh tokens must outrank tokens one FAST lifetime old, so weights stay within a factor e
DEFAULT_IMPORTANCE = {
    Tag.GPS: 1.0, Tag.IMAGE: 1.5, Tag.LIDAR: 2.0, Tag.CLS: 1.0,
    Tag.MISSING_IMAGE: 0.5, Tag.MISSING_LIDAR: 0.5,
}


@dataclass(frozen=True)
class StoreConfig:
    budget: int = 4
    ttl: dict = field(default_factory=lambda: dict(DEFAULT_TTL))
    importance: dict = field(default_factory=lambda: dict(DEFAULT_IMPORTANCE))

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        ttl = {TTLClass(k): float(v) for k, v in self.ttl.items()}
        if any(not v > 0 for v in ttl.values()):
            raise ValueError("TTLs must be positive or infinite")
        object.__setattr__(self, "ttl", ttl)
        object.__setattr__(self, "importance", {Tag(k): float(v) for k, v in self.importance.items()})

    def ttl_of(self, token: ContextToken) -> float:
        return self.ttl.get(token.ttl_class, DEFAULT_TTL[token.ttl_class])

    def weight_of(self, token: ContextToken) -> float:
        return self.importance.get(token.tag, 1.0)


@dataclass
class ContextStore:
    """Ordered token memory. ``entries`` holds ``(insertion_seq, token)`` pairs."""

    config: StoreConfig = field(default_factory=StoreConfig)
    entries: list = field(default_factory=list)
    _seq: int = 0

    def __len__(self):
        return len(self.entries)

    @property
    def tokens(self) -> list[ContextToken]:
        return [tok for _, tok in self.entries]

    def insert(self, token: ContextToken, now: float) -> "ContextStore":
        if token.timestamp > now + AGE_TOL:
            raise ValueError("token is stamped in the future")
        self.entries.append((self._seq, token))
        self._seq += 1
        if len(self.entries) > self.config.budget:
            self.prioritize(self.config.budget, now)
        return self

    def sweep(self, now: float) -> "ContextStore":
        """Drop every token whose age exceeds its class TTL."""
        self.entries = [(s, tok) for s, tok in self.entries
                        if now - tok.timestamp <= self.config.ttl_of(tok) + AGE_TOL]
        return self

    def score(self, token: ContextToken, now: float) -> float:
        ttl = self.config.ttl_of(token)
        fresh = 1.0 if math.isinf(ttl) else math.exp(-(now - token.timestamp) / ttl)
        return self.config.weight_of(token) * fresh

    def prioritize(self, budget: int, now: float) -> "ContextStore":
        """Keep the ``budget`` best-scoring tokens, preserving insertion order.

        Ties go to the more recent timestamp, then to the later insertion.
        """
        if budget < 0:
            raise ValueError("budget must be nonnegative")
        if len(self.entries) <= budget:
            return self
        ranked = sorted(self.entries,
                        key=lambda e: (self.score(e[1], now), e[1].timestamp, e[0]), reverse=True)
        keep = {s for s, _ in ranked[:budget]}
        self.entries = [e for e in self.entries if e[0] in keep]
        return self

    def utilization(self) -> float:
        return len(self.entries) / self.config.budget if self.config.budget else 0.0

    def check(self, now: float) -> None:
        """Assert both store invariants (used by property tests)."""
        assert len(self.entries) <= self.config.budget
        for _, tok in self.entries:
            assert now - tok.timestamp <= self.config.ttl_of(tok) + AGE_TOL


def radio_map_prior(embeddings_by_bucket: dict, bucket: int, now: float = 0.0) -> ContextToken:
    """STATIC token holding a precomputed per-position-bucket embedding.

    ``embeddings_by_bucket`` maps a position bucket to a mean token
    embedding (for instance the average GPS-token embedding of every
    training step in that bucket). Such tokens never age out.
    """
    return ContextToken(np.asarray(embeddings_by_bucket[bucket], dtype=float), Tag.GPS, now,
                        TTLClass.STATIC, 1.0)
