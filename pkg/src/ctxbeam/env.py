"""Synthetic roadside-base-station world.

A single vehicle drives along a straight road at a fixed lateral offset
from a base station at the origin. A second-lane obstacle (a truck, say)
appears and disappears following a two-state Markov chain and, while
present, can cut the line-of-sight path. The ground-truth beam is the
codebook entry that collects the most power over a line-of-sight path and
one specular reflection off a wall behind the road.

Three sensors observe the scene: a noisy GPS fix, a camera summary of the
obstacle, and a LiDAR sweep giving a precise ego position plus a coarse
occupancy pattern of the obstacle lane.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np


class Modality(str, Enum):
    GPS = "GPS"
    IMAGE = "IMAGE"
    LIDAR = "LIDAR"


FEATURE_DIMS = {Modality.GPS: 2, Modality.IMAGE: 4, Modality.LIDAR: 6}
CONTEXT_MODALITIES = (Modality.IMAGE, Modality.LIDAR)


class SchemaError(ValueError):
    """Raised when data does not match the expected layout."""


class GeometryError(ValueError):
    """Raised for degenerate geometry such as coincident points."""


@dataclass(frozen=True)
class BeamCodebook:
    """Uniform grid of beam boresights, ``num_beams`` steps from ``lo``.

    The grid is half-open: ``angles[i] = lo + i * (hi - lo) / num_beams``,
    so the 32-beam default has a beam pointing exactly at broadside (90 deg).
    """

    num_beams: int = 32
    lo: float = 45.0
    hi: float = 135.0
    beamwidth_sigma: float = 3.0

    def __post_init__(self):
        if self.num_beams <= 0:
            raise ValueError("num_beams must be positive")
        if not self.hi > self.lo:
            raise ValueError("codebook span must be increasing")
        if self.beamwidth_sigma <= 0:
            raise ValueError("beamwidth_sigma must be positive")

    @property
    def angles(self) -> np.ndarray:
        return self.lo + np.arange(self.num_beams) * (self.hi - self.lo) / self.num_beams

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.num_beams


@dataclass(frozen=True)
class PathModel:
    los_blocked_attenuation_db: float = 20.0
    reflection_loss_db: float = 6.0
    reflector_line_y: float = 40.0

    def __post_init__(self):
        if self.los_blocked_attenuation_db < 0 or self.reflection_loss_db < 0:
            raise ValueError("attenuations must be nonnegative")


@dataclass(frozen=True)
class EnvConfig:
    """Scene geometry, dynamics and sensor noise.

    The noise magnitudes and the LiDAR cell width are the calibration knobs
    that set how much each sensor tells the predictor.
    """

    bs_pos: tuple[float, float] = (0.0, 0.0)
    road_y: float = 20.0
    x_min: float = -100.0
    x_max: float = 100.0
    start_x: tuple[float, float] = (-50.0, -30.0)
    dt: float = 0.1
    episode_steps: int = 200
    # mobility
    speed_min: float = 5.0
    speed_max: float = 15.0
    speed_mean: float = 6.0
    speed_reversion: float = 0.05
    speed_noise: float = 0.3
    # blockage
    p_on: float = 0.05
    p_off: float = 0.05
    blocker_lane_y: float = 10.0
    blocker_half_width: float = 4.0
    blocker_spawn: float = 3.0
    blocker_drift: float = 0.3
    # sensors
    gps_sigma: float = 8.0
    image_flip: float = 0.05
    image_center_sigma: float = 1.5
    image_width_sigma: float = 1.0
    image_clutter_sigma: float = 1.0
    lidar_sigma: float = 5.0
    lidar_cell_width: float = 1.5
    codebook: BeamCodebook = field(default_factory=BeamCodebook)
    paths: PathModel = field(default_factory=PathModel)

    def __post_init__(self):
        if not self.speed_min <= self.speed_mean <= self.speed_max:
            raise ValueError("speed_mean must lie within [speed_min, speed_max]")
        for name in ("p_on", "p_off", "image_flip"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class WorldState:
    time: float
    vehicle_pos: tuple[float, float]
    vehicle_speed: float
    blocker_active: bool
    blocker_center_x: float
    blocker_half_width: float = 4.0
    rng_state: dict | None = None
    terminated: bool = False

    @property
    def x(self) -> float:
        return self.vehicle_pos[0]


@dataclass(frozen=True)
class Observation:
    modality: Modality
    features: np.ndarray
    timestamp: float

    def __post_init__(self):
        modality = Modality(self.modality)
        object.__setattr__(self, "modality", modality)
        feats = np.asarray(self.features, dtype=float)
        if feats.shape != (FEATURE_DIMS[modality],):
            raise SchemaError(
                f"{modality.value} features must have dim {FEATURE_DIMS[modality]}, "
                f"got shape {feats.shape}"
            )
        object.__setattr__(self, "features", feats)


def _generator(state: dict) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)


def initial_state(cfg: EnvConfig, rng: np.random.Generator) -> WorldState:
    """Draw a fresh episode start; the returned state owns a child RNG."""
    x0 = rng.uniform(*cfg.start_x) if cfg.start_x[0] < cfg.start_x[1] else cfg.start_x[0]
    speed = min(max(cfg.speed_mean + cfg.speed_noise * rng.standard_normal(), cfg.speed_min),
                cfg.speed_max)
    active = bool(rng.random() < cfg.p_on / max(cfg.p_on + cfg.p_off, 1e-12))
    crossing = _lane_crossing(cfg, (x0, cfg.road_y))
    center = crossing + rng.uniform(-cfg.blocker_spawn, cfg.blocker_spawn)
    child = np.random.PCG64(rng.integers(2**63))
    return WorldState(
        time=0.0,
        vehicle_pos=(float(x0), cfg.road_y),
        vehicle_speed=float(speed),
        blocker_active=active,
        blocker_center_x=float(center),
        blocker_half_width=cfg.blocker_half_width,
        rng_state=child.state,
    )


def advance_state(
    world: WorldState, dt: float, cfg: EnvConfig | None = None, *, perturb: bool = True
) -> WorldState:
    """Move the scene forward by ``dt`` seconds and return the new state.

    The vehicle advances at its current speed, then the speed takes a
    mean-reverting random step (skipped when ``perturb`` is false) clamped
    to the configured bounds. The obstacle drifts with the line-of-sight
    crossing point and toggles on/off with the Markov probabilities.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfg = cfg or EnvConfig()
    rng = _generator(world.rng_state) if world.rng_state is not None else np.random.default_rng()

    x = world.x + world.vehicle_speed * dt
    speed = world.vehicle_speed
    if perturb:
        speed += cfg.speed_reversion * (cfg.speed_mean - speed) + cfg.speed_noise * rng.standard_normal()
    speed = min(max(speed, cfg.speed_min), cfg.speed_max)

    active = world.blocker_active
    center = world.blocker_center_x
    u = rng.random()
    jitter = rng.standard_normal()
    spawn = rng.uniform(-cfg.blocker_spawn, cfg.blocker_spawn)
    crossing = _lane_crossing(cfg, (x, world.vehicle_pos[1]))
    if active:
        # the obstacle keeps station relative to the sight line, up to drift
        center += (crossing - _lane_crossing(cfg, world.vehicle_pos)) + cfg.blocker_drift * jitter
        if u < cfg.p_off:
            active = False
    elif u < cfg.p_on:
        active = True
        center = crossing + spawn

    terminated = world.terminated or not (cfg.x_min <= x <= cfg.x_max)
    x = min(max(x, cfg.x_min), cfg.x_max)
    return WorldState(
        time=world.time + dt,
        vehicle_pos=(float(x), world.vehicle_pos[1]),
        vehicle_speed=float(speed),
        blocker_active=bool(active),
        blocker_center_x=float(center),
        blocker_half_width=world.blocker_half_width,
        rng_state=rng.bit_generator.state,
        terminated=terminated,
    )


def los_angle(bs_pos, veh_pos) -> float:
    """Angle of the BS-to-vehicle direction in degrees, in (-180, 180]."""
    dx = veh_pos[0] - bs_pos[0]
    dy = veh_pos[1] - bs_pos[1]
    if dx == 0 and dy == 0:
        raise GeometryError("base station and vehicle coincide")
    ang = math.degrees(math.atan2(dy, dx))
    return 180.0 if ang == -180.0 else ang


def beam_gain(beam_angle, path_angle, sigma):
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError("sigma must be positive")
    d = (np.asarray(beam_angle) - np.asarray(path_angle)) / sigma
    g = np.exp(-d * d)
    return float(g) if np.ndim(g) == 0 else g


def reflected_angle(bs_pos, veh_pos, paths: PathModel) -> float:
    """Departure angle of the wall bounce, via the vehicle's mirror image."""
    mirrored = (veh_pos[0], 2.0 * paths.reflector_line_y - veh_pos[1])
    return los_angle(bs_pos, mirrored)


def _lane_crossing(cfg: EnvConfig, veh_pos) -> float:
    bx, by = cfg.bs_pos
    frac = (cfg.blocker_lane_y - by) / (veh_pos[1] - by)
    return bx + (veh_pos[0] - bx) * frac


def los_blocked(world: WorldState, cfg: EnvConfig | None = None) -> bool:
    """True when the obstacle is present and covers the sight-line crossing."""
    cfg = cfg or EnvConfig()
    if not world.blocker_active:
        return False
    crossing = _lane_crossing(cfg, world.vehicle_pos)
    return abs(crossing - world.blocker_center_x) <= world.blocker_half_width


def beam_powers(world: WorldState, codebook: BeamCodebook, paths: PathModel,
                cfg: EnvConfig | None = None) -> np.ndarray:
    cfg = cfg or EnvConfig()
    angles = codebook.angles
    theta_los = los_angle(cfg.bs_pos, world.vehicle_pos)
    theta_ref = reflected_angle(cfg.bs_pos, world.vehicle_pos, paths)
    att_los = paths.los_blocked_attenuation_db if los_blocked(world, cfg) else 0.0
    p_los = 10.0 ** (-att_los / 10.0) * beam_gain(angles, theta_los, codebook.beamwidth_sigma)
    p_ref = 10.0 ** (-paths.reflection_loss_db / 10.0) * beam_gain(
        angles, theta_ref, codebook.beamwidth_sigma)
    return np.maximum(p_los, p_ref)


def best_beam(world: WorldState, codebook: BeamCodebook | None = None,
              paths: PathModel | None = None, cfg: EnvConfig | None = None) -> int:
    """Index of the strongest beam; ``np.argmax`` resolves ties to the lowest index."""
    cfg = cfg or EnvConfig()
    codebook = codebook or cfg.codebook
    paths = paths or cfg.paths
    return int(np.argmax(beam_powers(world, codebook, paths, cfg)))


def lidar_occupancy(world: WorldState, cfg: EnvConfig | None = None) -> np.ndarray:
    """Binary occupancy of three obstacle-lane cells abeam of the vehicle.

    The cells are ``lidar_cell_width`` wide and centred at the vehicle's
    x and one cell to either side; a cell is occupied when the obstacle
    segment overlaps it. The sensor therefore only sees the part of the
    lane next to the car, not necessarily where the sight line crosses it.
    """
    cfg = cfg or EnvConfig()
    occ = np.zeros(3)
    if not world.blocker_active:
        return occ
    w = cfg.lidar_cell_width
    x = world.x
    lo = world.blocker_center_x - world.blocker_half_width
    hi = world.blocker_center_x + world.blocker_half_width
    for k, off in enumerate((-w, 0.0, w)):
        cell_lo, cell_hi = x + off - w / 2, x + off + w / 2
        occ[k] = float(hi >= cell_lo and lo <= cell_hi)
    return occ


def observe(world: WorldState, modality, rng: np.random.Generator,
            cfg: EnvConfig | None = None) -> Observation:
    cfg = cfg or EnvConfig()
    modality = Modality(modality)
    x, y = world.vehicle_pos
    if modality is Modality.GPS:
        feats = np.array([x, y]) + cfg.gps_sigma * rng.standard_normal(2)
    elif modality is Modality.IMAGE:
        flag = float(world.blocker_active) if rng.random() >= cfg.image_flip \
            else float(not world.blocker_active)
        noise = rng.standard_normal(3)
        if world.blocker_active:
            center, width = world.blocker_center_x, world.blocker_half_width
        else:
            center, width = 0.0, 0.0
        feats = np.array([
            flag,
            center + cfg.image_center_sigma * noise[0],
            width + cfg.image_width_sigma * noise[1],
            cfg.image_clutter_sigma * noise[2],
        ])
    else:
        noise = rng.standard_normal(3)
        feats = np.concatenate([
            [x + cfg.lidar_sigma * noise[0], y + cfg.lidar_sigma * noise[1]],
            lidar_occupancy(world, cfg),
            [cfg.lidar_sigma * noise[2]],
        ])
    return Observation(modality, feats, world.time)


# ---------------------------------------------------------------------------
# episodes and the JSONL dataset


@dataclass
class EpisodeRecord:
    """One rollout, stored column-wise (one row per step)."""

    t: np.ndarray
    x: np.ndarray
    speed: np.ndarray
    blocked: np.ndarray
    gps: np.ndarray
    image: np.ndarray
    lidar: np.ndarray
    beam: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.speed = np.asarray(self.speed, dtype=float)
        self.blocked = np.asarray(self.blocked, dtype=bool)
        self.gps = np.asarray(self.gps, dtype=float).reshape(-1, 2)
        self.image = np.asarray(self.image, dtype=float).reshape(-1, 4)
        self.lidar = np.asarray(self.lidar, dtype=float).reshape(-1, 6)
        self.beam = np.asarray(self.beam, dtype=int)
        n = len(self.t)
        if n == 0:
            raise SchemaError("episode must contain at least one step")
        for name in ("x", "speed", "blocked", "gps", "image", "lidar", "beam"):
            if len(getattr(self, name)) != n:
                raise SchemaError(f"column {name!r} has {len(getattr(self, name))} rows, expected {n}")

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, EpisodeRecord):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("t", "x", "speed", "blocked", "gps", "image", "lidar", "beam"))

    def observation(self, step: int, modality) -> Observation:
        modality = Modality(modality)
        feats = {Modality.GPS: self.gps, Modality.IMAGE: self.image,
                 Modality.LIDAR: self.lidar}[modality][step]
        return Observation(modality, feats, float(self.t[step]))


def generate_episode(cfg: EnvConfig, rng: np.random.Generator) -> EpisodeRecord:
    """Roll the world forward, recording every sensor and the true beam.

    All three sensors are sampled at every step whether or not an agent
    would pay for them, so every acquisition policy sees the same world.
    """
    world = initial_state(cfg, rng)
    rows = []
    for _ in range(cfg.episode_steps):
        obs = [observe(world, m, rng, cfg).features for m in Modality]
        rows.append((world.time, world.x, world.vehicle_speed, los_blocked(world, cfg),
                     *obs, best_beam(world, cfg=cfg)))
        world = advance_state(world, cfg.dt, cfg)
        if world.terminated:
            break
    cols = list(zip(*rows))
    return EpisodeRecord(*cols)


# independent random streams so training, policy learning and evaluation
# never share an episode for the same seed
STREAM_DATA, STREAM_POLICY, STREAM_EVAL = 0, 1, 2


def episode_rng(seed: int, index: int, stream: int = STREAM_DATA) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream), int(index)])


def generate_dataset(cfg: EnvConfig, episodes: int, seed: int,
                     stream: int = STREAM_DATA) -> list[EpisodeRecord]:
    return [generate_episode(cfg, episode_rng(seed, i, stream)) for i in range(episodes)]


_KEYS = ("t", "x", "speed", "blocked", "gps", "image", "lidar", "beam")


def export_dataset(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            for i in range(len(rec)):
                row = {
                    "t": float(rec.t[i]),
                    "x": float(rec.x[i]),
                    "speed": float(rec.speed[i]),
                    "blocked": bool(rec.blocked[i]),
                    "gps": [float(v) for v in rec.gps[i]],
                    "image": [float(v) for v in rec.image[i]],
                    "lidar": [float(v) for v in rec.lidar[i]],
                    "beam": int(rec.beam[i]),
                }
                fh.write(json.dumps(row) + "\n")


def import_dataset(path, num_beams: int | None = None) -> list[EpisodeRecord]:
    """Read a JSONL dataset; a new episode starts wherever ``t`` fails to increase."""
    episodes: list[list[dict]] = []
    prev_t = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        _check_row(row, lineno, num_beams)
        if prev_t is None or row["t"] <= prev_t:
            episodes.append([])
        episodes[-1].append(row)
        prev_t = row["t"]
    return [EpisodeRecord(*[[r[k] for r in rows] for k in _KEYS]) for rows in episodes]


def _check_row(row, lineno, num_beams):
    if not isinstance(row, dict):
        raise SchemaError(f"line {lineno}: expected a JSON object")
    missing = [k for k in _KEYS if k not in row]
    extra = [k for k in row if k not in _KEYS]
    if missing or extra:
        raise SchemaError(f"line {lineno}: missing keys {missing}, unexpected keys {extra}")
    for key, mod in (("gps", Modality.GPS), ("image", Modality.IMAGE), ("lidar", Modality.LIDAR)):
        vec = row[key]
        if not isinstance(vec, list) or len(vec) != FEATURE_DIMS[mod]:
            got = len(vec) if isinstance(vec, list) else type(vec).__name__
            raise SchemaError(
                f"line {lineno}: {mod.value} features must have dim {FEATURE_DIMS[mod]}, got {got}")
    beam = row["beam"]
    if not isinstance(beam, int) or beam < 0 or (num_beams is not None and beam >= num_beams):
        raise SchemaError(f"line {lineno}: beam index {beam!r} out of range")


def state_summary(world: WorldState, cfg: EnvConfig | None = None) -> dict:
    return {"t": world.time, "x": world.x, "speed": world.vehicle_speed,
            "blocked": los_blocked(world, cfg)}


def with_noise(cfg: EnvConfig, **changes) -> EnvConfig:
    """Copy of ``cfg`` with some knobs changed (handy for noiseless checks)."""
    return replace(cfg, **changes)
