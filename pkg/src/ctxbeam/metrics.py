"""Scoring a predictor plus an acquisition rule on held-out episodes.

A report pools every decision step over all requested seeds. The CSV has
one row per configuration with the columns in ``REPORT_COLUMNS``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .env import STREAM_EVAL, EnvConfig, Modality, generate_dataset
from .net import ModelParams
from .policy import CostSpec, PolicyTable, RLConfig, run_lockstep
from .rollout import ACTIONS, FIXED_CONFIGS, StepLog
from .store import StoreConfig

RL_NAME = "RL"
REPORT_COLUMNS = ("config", "accuracy", "mean_reward", "usage_image", "usage_lidar",
                  "mean_cost", "utilization", "episodes", "seeds")


class UndefinedComparison(ValueError):
    """Two reports cost the same, so accuracy per unit cost is undefined."""


@dataclass(frozen=True)
class MetricsReport:
    config: str
    accuracy: float
    mean_reward: float
    usage_image: float
    usage_lidar: float
    mean_cost: float
    utilization: float
    episodes: int
    seeds: tuple

    def __post_init__(self):
        for name in ("accuracy", "usage_image", "usage_lidar", "utilization"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a fraction, got {v}")

    def row(self) -> list:
        return [self.config, repr(self.accuracy), repr(self.mean_reward), repr(self.usage_image),
                repr(self.usage_lidar), repr(self.mean_cost), repr(self.utilization),
                self.episodes, " ".join(str(s) for s in self.seeds)]


def summarize(name: str, logs: list[StepLog], budget: int, episodes: int, seeds) -> MetricsReport:
    """Reduce step logs (in the given order) to a report."""
    hits, rewards, costs, acts, hist = [], [], [], [], []
    for log in logs:
        hits.extend(int(y in tk) for y, tk in zip(log.label, log.topk))
        rewards.extend(log.reward)
        costs.extend(log.cost)
        acts.extend(log.action)
        hist.extend(log.history_len)
    if not hits:
        raise ValueError("no decision steps to summarize")
    acts = np.asarray(acts)
    img = np.isin(acts, [i for i, a in enumerate(ACTIONS) if Modality.IMAGE in a])
    lid = np.isin(acts, [i for i, a in enumerate(ACTIONS) if Modality.LIDAR in a])
    util = float(np.mean(hist)) / budget if budget else 0.0
    return MetricsReport(name, float(np.mean(hits)), float(np.mean(rewards)), float(img.mean()),
                         float(lid.mean()), float(np.mean(costs)), util, int(episodes),
                         tuple(int(s) for s in seeds))


def evaluate(model: ModelParams, config, env_cfg: EnvConfig, episodes: int, seeds,
             costs: CostSpec | None = None, store_cfg: StoreConfig | None = None,
             rl: RLConfig | None = None, logs: list | None = None) -> MetricsReport:
    """Evaluate a fixed configuration name or a greedy ``PolicyTable``.

    Each seed draws its own evaluation episodes. Pass a list as ``logs`` to
    receive the per-seed step logs.
    """
    store_cfg = store_cfg or StoreConfig()
    if isinstance(config, PolicyTable):
        name, table = RL_NAME, config
        choose = lambda states: [table.greedy(s) for s in states]  # noqa: E731
    elif config in FIXED_CONFIGS:
        name, a = config, FIXED_CONFIGS[config]
        choose = lambda states: [a] * len(states)  # noqa: E731
    else:
        raise ValueError(f"unknown configuration {config!r}")
    seeds = [int(s) for s in seeds]
    collected = []
    for seed in seeds:
        records = generate_dataset(env_cfg, episodes, seed, stream=STREAM_EVAL)
        collected.append(run_lockstep(records, model, choose, costs, store_cfg, rl))
    if logs is not None:
        logs.extend(collected)
    return summarize(name, collected, store_cfg.budget, episodes, seeds)


def information_density(a: MetricsReport, b: MetricsReport) -> float:
    """Accuracy gained per unit of extra cost when moving from ``b`` to ``a``."""
    d_cost = a.mean_cost - b.mean_cost
    if d_cost == 0:
        raise UndefinedComparison(f"{a.config} and {b.config} have equal mean cost")
    return (a.accuracy - b.accuracy) / d_cost


def write_reports(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow(r.row())


def read_reports(path) -> list[MetricsReport]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(MetricsReport(
                row["config"], float(row["accuracy"]), float(row["mean_reward"]),
                float(row["usage_image"]), float(row["usage_lidar"]), float(row["mean_cost"]),
                float(row["utilization"]), int(row["episodes"]),
                tuple(int(s) for s in row["seeds"].split())))
    return out
