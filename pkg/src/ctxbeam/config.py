"""Run configuration as a flat text file of dotted ``key = value`` lines.

Values are Python literals (numbers, strings, tuples, ``inf``). Blank lines
and ``#`` comments are ignored. Any key that does not name an existing
field is an error, so a typo can never silently fall back to a default.

    seed = 3
    env.gps_sigma = 6.0
    env.codebook.num_beams = 32
    store.ttl.FAST = 0.1
    eval.configs = ('Only_GPS', 'Full_observation')
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, fields, is_dataclass, replace
from enum import Enum

from .embed import Tag, TTLClass
from .env import EnvConfig
from .metrics import RL_NAME
from .net import ModelConfig, TrainConfig
from .policy import CostSpec, RLConfig
from .rollout import FIXED_CONFIGS
from .store import StoreConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    episodes: int = 200

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("data.episodes must be nonnegative")


@dataclass(frozen=True)
class EvalConfig:
    episodes: int = 100
    seeds: tuple = (0, 1, 2, 3, 4)
    configs: tuple = (*FIXED_CONFIGS, RL_NAME)

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "configs", tuple(self.configs))
        if self.episodes < 1:
            raise ValueError("eval.episodes must be positive")
        unknown = [c for c in self.configs if c not in FIXED_CONFIGS and c != RL_NAME]
        if unknown:
            raise ValueError(f"unknown evaluation configs {unknown}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str = "out"
    env: EnvConfig = field(default_factory=EnvConfig)
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    rl: RLConfig = field(default_factory=RLConfig)
    costs: CostSpec = field(default_factory=CostSpec)
    store: StoreConfig = field(default_factory=StoreConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def with_seed(self, seed: int) -> "RunConfig":
        """One seed drives data generation, model training and policy learning."""
        return replace(self, seed=seed, train=replace(self.train, seed=seed),
                       rl=replace(self.rl, seed=seed))


# -- flattening ---------------------------------------------------------------

def _literal(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, Enum):
        return repr(v.value)
    if isinstance(v, tuple):
        body = ", ".join(_literal(x) for x in v)
        return f"({body},)" if len(v) == 1 else f"({body})"
    return repr(v)


def _flatten(obj, prefix=""):
    for f in fields(obj):
        v = getattr(obj, f.name)
        key = prefix + f.name
        if is_dataclass(v):
            yield from _flatten(v, key + ".")
        elif isinstance(v, dict):
            for k in sorted(v, key=lambda e: e.value):
                yield f"{key}.{k.value}", v[k]
        else:
            yield key, v


def dumps(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_literal(v)}\n" for k, v in _flatten(cfg))


class _Inf(ast.NodeTransformer):
    def visit_Name(self, node):
        if node.id in ("inf", "nan"):
            return ast.copy_location(ast.Constant(float(node.id)), node)
        raise ConfigError(f"unexpected name {node.id!r}")


def _parse_value(text: str):
    try:
        tree = _Inf().visit(ast.parse(text.strip(), mode="eval"))
        return ast.literal_eval(tree.body)
    except (SyntaxError, ValueError) as exc:
        raise ConfigError(f"cannot parse value {text.strip()!r}") from exc


def _coerce(value, default, key):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean")
        return value
    if isinstance(default, int) and not isinstance(value, bool) and isinstance(value, int):
        return value
    if isinstance(default, float) and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(default, str) and isinstance(value, str):
        return value
    if isinstance(default, tuple) and isinstance(value, (tuple, list)):
        if len(default) and len(value) == len(default):
            return tuple(_coerce(v, d, key) for v, d in zip(value, default))
        return tuple(value)
    raise ConfigError(f"{key}: value {value!r} does not match the type of {default!r}")


def _apply(obj, path: list[str], value, key):
    name = path[0]
    names = {f.name for f in fields(obj)}
    if name not in names:
        raise ConfigError(f"unknown key {key!r}")
    cur = getattr(obj, name)
    if len(path) == 1:
        if is_dataclass(cur) or isinstance(cur, dict):
            raise ConfigError(f"{key} is a section, not a value")
        return replace(obj, **{name: _coerce(value, cur, key)})
    if is_dataclass(cur):
        return replace(obj, **{name: _apply(cur, path[1:], value, key)})
    if isinstance(cur, dict) and len(path) == 2:
        enum = TTLClass if name == "ttl" else Tag
        try:
            k = enum(path[1])
        except ValueError:
            raise ConfigError(f"unknown key {key!r}") from None
        return replace(obj, **{name: {**cur, k: _coerce(value, 1.0, key)}})
    raise ConfigError(f"unknown key {key!r}")


def loads(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            cfg = _apply(cfg, key.split("."), _parse_value(value), key)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    return cfg


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def save(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(cfg))
