"""A miniature end-to-end run: simulate, train, learn a policy, evaluate.

Small sizes keep it to a minute or so; the numbers are therefore rough.

    python3 demos/quick_pipeline.py
"""

from dataclasses import replace

from ctxbeam.env import EnvConfig, generate_dataset
from ctxbeam.metrics import evaluate, information_density
from ctxbeam.net import TrainConfig, train_model
from ctxbeam.policy import RLConfig, train_policy
from ctxbeam.rollout import FIXED_CONFIGS

env = EnvConfig()
data = generate_dataset(env, 40, seed=0)
model, losses = train_model(data, TrainConfig(epochs=6), log=print)

table, curve = train_policy(env, model, RLConfig(episodes=100))
print(f"policy: last-20 mean training reward {sum(curve[-20:]) / 20:.3f}")

# 100-step episodes stay near the base station, where prediction is hardest
short = replace(env, episode_steps=100)
reports = {name: evaluate(model, name, short, 20, [0]) for name in FIXED_CONFIGS}
reports["RL"] = evaluate(model, table, short, 20, [0])
for r in reports.values():
    print(f"{r.config:<17} top-3 {r.accuracy:.3f}  reward {r.mean_reward:+.3f}  cost {r.mean_cost:.2f}")

base = reports["Only_GPS"]
for name in ("Missing_LiDAR", "Missing_image", "Full_observation"):
    print(f"accuracy per unit cost, {name} over Only_GPS: "
          f"{information_density(reports[name], base):.3f}")
