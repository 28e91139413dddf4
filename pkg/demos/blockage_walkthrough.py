"""Drive one vehicle past the base station and watch the best beam react to blockage.

    python3 demos/blockage_walkthrough.py
"""

from dataclasses import replace

import numpy as np

from ctxbeam.env import EnvConfig, advance_state, best_beam, initial_state, los_angle, los_blocked

cfg = replace(EnvConfig(), p_on=0.08, p_off=0.08)
world = initial_state(cfg, np.random.default_rng(4))

print(f"{'t':>5} {'x':>7} {'LoS deg':>8} {'blocked':>8} {'beam':>5}")
step = 0
while not world.terminated and step < 200:
    if step % 10 == 0:
        angle = los_angle(cfg.bs_pos, world.vehicle_pos)
        blocked = los_blocked(world, cfg)
        print(f"{world.time:5.1f} {world.x:7.1f} {angle:8.1f} {str(blocked):>8} "
              f"{best_beam(world, cfg.codebook, cfg.paths):5d}")
    world = advance_state(world, cfg.dt, cfg)
    step += 1

# Away from the crossing the LoS angle leaves the codebook and the beam pins to an edge,
# or to the reflected direction when that path is stronger.
