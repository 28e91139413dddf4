"""Step-by-step context delivery over recorded episodes.

At every step the agent ages out stale tokens, hands the surviving ones to
the model as history, acquires the sensors its action asks for, predicts
the next-step beam, and finally stores the freshly encoded tokens. Several
episodes can be advanced in lock step so the model runs one padded batch
per step; each episode still owns its own store.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embed import build_sequence
from .env import EpisodeRecord, Modality
from .net import ModelParams, _core_forward, softmax
from .store import ContextStore, StoreConfig

# action index -> contextual modalities acquired on top of GPS
ACTIONS = ((), (Modality.IMAGE,), (Modality.LIDAR,), (Modality.IMAGE, Modality.LIDAR))
ACTION_NAMES = ("none", "image", "lidar", "image+lidar")
FIXED_CONFIGS = {
    "Only_GPS": 0,
    "Missing_LiDAR": 1,
    "Missing_image": 2,
    "Full_observation": 3,
}


def forward_many(sequences, params: ModelParams) -> np.ndarray:
    """Logits for several token sequences at once (padded and masked)."""
    n = len(sequences)
    L = max(len(s) for s in sequences)
    d = params.config.d_model
    x0 = np.zeros((n, L, d))
    valid = np.zeros((n, L), dtype=bool)
    for i, seq in enumerate(sequences):
        x0[i, :len(seq)] = [t.embedding for t in seq]
        valid[i, :len(seq)] = True
    x0 += params.arrays["pos"][:L]
    logits, _ = _core_forward(x0, valid, params)
    return logits


@dataclass
class StepResult:
    topk: list
    top1_prob: float
    history_len: int


@dataclass
class EpisodeRunner:
    """Delivery state for one episode: its record, cursor and token store."""

    record: EpisodeRecord
    store: ContextStore
    step: int = 0

    @property
    def done(self) -> bool:
        # the last recorded step has no next-step label
        return self.step >= len(self.record) - 1

    @property
    def now(self) -> float:
        return float(self.record.t[self.step])

    @property
    def label(self) -> int:
        return int(self.record.beam[self.step + 1])

    def gps_x(self) -> float:
        return float(self.record.gps[self.step, 0])

    def prepare(self, action: int, params: ModelParams):
        now = self.now
        self.store.sweep(now)
        history = self.store.tokens
        rec, t = self.record, self.step
        wanted = ACTIONS[action]
        seq = build_sequence(
            rec.observation(t, Modality.GPS),
            rec.observation(t, Modality.IMAGE) if Modality.IMAGE in wanted else None,
            rec.observation(t, Modality.LIDAR) if Modality.LIDAR in wanted else None,
            history, params.encoder, max_history=params.config.max_len - 4,
        )
        acquired = [seq[1]] + [seq[2 + i] for i, m in enumerate((Modality.IMAGE, Modality.LIDAR))
                               if m in wanted]
        return seq, acquired, len(history)

    def commit(self, acquired) -> None:
        now = self.now
        for tok in acquired:
            self.store.insert(tok, now)
        self.step += 1


def step_many(runners, actions, params: ModelParams, k: int = 3) -> list[StepResult]:
    """Advance each runner by one step with its action; returns per-runner results."""
    prepared = [r.prepare(a, params) for r, a in zip(runners, actions)]
    logits = forward_many([p[0] for p in prepared], params)
    probs = softmax(logits)
    order = np.argsort(-probs, axis=-1, kind="stable")[:, :k]
    out = []
    for r, (seq, acquired, n_hist), top, pr in zip(runners, prepared, order, probs):
        r.commit(acquired)
        out.append(StepResult([int(i) for i in top], float(pr[top[0]]), n_hist))
    return out


def make_runners(records, store_cfg: StoreConfig | None = None) -> list[EpisodeRunner]:
    store_cfg = store_cfg or StoreConfig()
    return [EpisodeRunner(rec, ContextStore(store_cfg)) for rec in records]


@dataclass
class StepLog:
    """Flat per-step log of a batch of rollouts (one entry per decision)."""

    episode: list = field(default_factory=list)
    step: list = field(default_factory=list)
    action: list = field(default_factory=list)
    topk: list = field(default_factory=list)
    label: list = field(default_factory=list)
    reward: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    history_len: list = field(default_factory=list)
    top1_prob: list = field(default_factory=list)

    def __len__(self):
        return len(self.step)
