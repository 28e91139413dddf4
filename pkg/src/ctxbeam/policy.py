"""Which sensors to pay for: a tabular Q-learning acquisition policy.

GPS is task data and is acquired (and charged) at every step. The four
actions add nothing, the camera, the LiDAR, or both. The agent state is the
GPS position bucket, a confidence bucket from the model's previous top-1
probability, and the previous action (which tells the agent what is sitting
in its context store).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .env import STREAM_POLICY, EnvConfig, Modality, generate_dataset
from .net import ModelParams
from .rollout import ACTIONS, StepLog, make_runners, step_many
from .store import StoreConfig

N_POS, N_BELIEF, N_ACTIONS = 10, 3, len(ACTIONS)
N_STATES = N_POS * N_BELIEF * N_ACTIONS


@dataclass(frozen=True)
class CostSpec:
    gps: float = 0.01
    image: float = 0.1
    lidar: float = 0.9

    def __post_init__(self):
        if min(self.gps, self.image, self.lidar) < 0:
            raise ValueError("costs must be nonnegative")

    def of(self, action) -> float:
        """Per-step cost of an action (index or modality collection), GPS included."""
        mods = ACTIONS[action] if isinstance(action, (int, np.integer)) else action
        total = self.gps
        for m in mods:
            total += self.image if Modality(m) is Modality.IMAGE else self.lidar
        return total


@dataclass(frozen=True)
class RLConfig:
    alpha: float = 0.1
    gamma: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    anneal_frac: float = 0.5
    episodes: int = 500
    parallel_episodes: int = 10
    seed: int = 0
    x_range: tuple = (-100.0, 100.0)
    belief_thresholds: tuple = (0.4, 0.7)

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        for e in (self.eps_start, self.eps_end):
            if not 0.0 <= e <= 1.0:
                raise ValueError("epsilon must be in [0, 1]")
        if self.parallel_episodes < 1:
            raise ValueError("parallel_episodes must be at least 1")

    def epsilon(self, step: int, total_steps: int) -> float:
        horizon = max(1, int(self.anneal_frac * total_steps))
        frac = min(1.0, step / horizon)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


@dataclass(frozen=True)
class AgentState:
    pos_bucket: int
    belief_bucket: int
    prev_action: int

    @property
    def index(self) -> int:
        return (self.pos_bucket * N_BELIEF + self.belief_bucket) * N_ACTIONS + self.prev_action

    @classmethod
    def from_index(cls, s: int) -> "AgentState":
        rest, prev = divmod(s, N_ACTIONS)
        pos, belief = divmod(rest, N_BELIEF)
        return cls(pos, belief, prev)


def position_bucket(x: float, x_range=(-100.0, 100.0)) -> int:
    lo, hi = x_range
    b = int(math.floor((x - lo) / (hi - lo) * N_POS))
    return min(max(b, 0), N_POS - 1)


def belief_bucket(top1_prob: float, thresholds=(0.4, 0.7)) -> int:
    if top1_prob < thresholds[0]:
        return 0
    return 1 if top1_prob <= thresholds[1] else 2


class PolicyTable:
    def __init__(self, q=None):
        self.q = np.zeros((N_STATES, N_ACTIONS)) if q is None else np.array(q, dtype=float)
        if self.q.shape != (N_STATES, N_ACTIONS):
            raise ValueError(f"Q table must be {N_STATES}x{N_ACTIONS}")

    def greedy(self, s: int) -> int:
        return int(np.argmax(self.q[s]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state_id", "action_id", "q_value"])
            for s in range(N_STATES):
                for a in range(N_ACTIONS):
                    w.writerow([s, a, repr(float(self.q[s, a]))])

    @classmethod
    def from_csv(cls, path) -> "PolicyTable":
        q = np.full((N_STATES, N_ACTIONS), np.nan)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                q[int(row["state_id"]), int(row["action_id"])] = float(row["q_value"])
        if np.isnan(q).any():
            raise ValueError(f"{path}: policy table is incomplete")
        return cls(q)


def reward(topk, true_beam: int, action, costs: CostSpec | None = None) -> float:
    """Top-k hit indicator minus the acquisition cost of the step."""
    costs = costs or CostSpec()
    return float(int(true_beam) in set(topk)) - costs.of(action)


def select_action(q: PolicyTable, s: int, eps: float, rng: np.random.Generator) -> int:
    if not 0.0 <= eps <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < eps:
        return int(rng.integers(N_ACTIONS))
    return q.greedy(s)


def q_update(q: PolicyTable, s: int, a: int, r: float, s_next, cfg: RLConfig) -> PolicyTable:
    """One-step Q-learning; ``s_next=None`` marks a terminal transition."""
    target = r if s_next is None else r + cfg.gamma * q.q[s_next].max()
    q.q[s, a] += cfg.alpha * (target - q.q[s, a])
    return q


def run_lockstep(records, params: ModelParams, choose, costs: CostSpec | None = None,
                 store_cfg: StoreConfig | None = None, rl: RLConfig | None = None,
                 learn=None, k: int = 3) -> StepLog:
    """Roll a group of episodes forward together.

    ``choose(states)`` maps a list of agent-state indices to actions.
    ``learn(s, a, r, s_next)`` (optional) is called once per transition,
    in episode order within each step.
    """
    costs = costs or CostSpec()
    rl = rl or RLConfig()
    runners = make_runners(records, store_cfg)
    n = len(runners)
    belief = [0] * n
    prev = [0] * n
    log = StepLog()
    active = [i for i in range(n) if not runners[i].done]
    while active:
        states = [AgentState(position_bucket(runners[i].gps_x(), rl.x_range), belief[i],
                             prev[i]).index for i in active]
        actions = [int(a) for a in choose(states)]
        labels = [runners[i].label for i in active]
        steps = [runners[i].step for i in active]
        results = step_many([runners[i] for i in active], actions, params, k)
        for i, s, a, y, t, res in zip(active, states, actions, labels, steps, results):
            r = reward(res.topk, y, a, costs)
            belief[i] = belief_bucket(res.top1_prob, rl.belief_thresholds)
            prev[i] = a
            if learn is not None:
                s_next = None if runners[i].done else AgentState(
                    position_bucket(runners[i].gps_x(), rl.x_range), belief[i], a).index
                learn(s, a, r, s_next)
            log.episode.append(i)
            log.step.append(t)
            log.action.append(a)
            log.topk.append(res.topk)
            log.label.append(y)
            log.reward.append(r)
            log.cost.append(costs.of(a))
            log.history_len.append(res.history_len)
            log.top1_prob.append(res.top1_prob)
        active = [i for i in active if not runners[i].done]
    return log


def train_policy(env_cfg: EnvConfig, model: ModelParams, cfg: RLConfig | None = None,
                 costs: CostSpec | None = None, store_cfg: StoreConfig | None = None,
                 records=None):
    """Learn the acquisition table against a frozen predictor.

    Episodes run ``cfg.parallel_episodes`` at a time; Q updates are applied
    sequentially. Epsilon anneals linearly over the first ``anneal_frac`` of
    all decision steps. Returns ``(table, per-episode mean reward)``.
    """
    cfg = cfg or RLConfig()
    costs = costs or CostSpec()
    if records is None:
        records = generate_dataset(env_cfg, cfg.episodes, cfg.seed, stream=STREAM_POLICY)
    total_steps = sum(max(len(r) - 1, 0) for r in records)
    table = PolicyTable()
    rng = np.random.default_rng([cfg.seed, 7])
    counter = [0]

    def choose(states):
        out = []
        for s in states:
            out.append(select_action(table, s, cfg.epsilon(counter[0], total_steps), rng))
            counter[0] += 1
        return out

    def learn(s, a, r, s_next):
        if not -costs.of(3) - 1e-12 <= r <= 1.0 - costs.gps + 1e-12:
            raise AssertionError(f"reward {r} outside its bounds")
        q_update(table, s, a, r, s_next, cfg)

    curve = []
    for start in range(0, len(records), cfg.parallel_episodes):
        group = records[start:start + cfg.parallel_episodes]
        log = run_lockstep(group, model, choose, costs, store_cfg, cfg, learn)
        ep = np.asarray(log.episode)
        rw = np.asarray(log.reward)
        for j in range(len(group)):
            sel = ep == j
            curve.append(float(rw[sel].mean()) if sel.any() else 0.0)
    if not np.all(np.isfinite(table.q)):
        raise FloatingPointError("Q table became non-finite")
    return table, curve


def write_curve(curve, path, column="mean_reward", index="episode") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([index, column])
        for i, v in enumerate(curve):
            w.writerow([i, repr(float(v))])
