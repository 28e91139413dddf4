import math

import pytest

from ctxbeam import config as cfgmod
from ctxbeam.config import ConfigError, RunConfig, dumps, loads
from ctxbeam.embed import Tag, TTLClass


def test_round_trip_default():
    assert loads(dumps(RunConfig())) == RunConfig()


def test_round_trip_modified():
    text = """
    # comment line
    seed = 3
    env.gps_sigma = 6          # ints widen to floats
    env.codebook.num_beams = 16
    store.ttl.FAST = 0.2
    store.ttl.SLOW = inf
    store.importance.LIDAR = 3.0
    eval.configs = ('Only_GPS',)
    costs.lidar = 0.5
    """
    cfg = loads(text)
    assert cfg.seed == 3 and cfg.env.gps_sigma == 6.0
    assert cfg.env.codebook.num_beams == 16
    assert cfg.store.ttl[TTLClass.FAST] == 0.2 and math.isinf(cfg.store.ttl[TTLClass.SLOW])
    assert cfg.store.importance[Tag.LIDAR] == 3.0
    assert cfg.eval.configs == ("Only_GPS",)
    assert loads(dumps(cfg)) == cfg


def test_file_round_trip(tmp_path):
    cfg = RunConfig().with_seed(9)
    cfgmod.save(cfg, tmp_path / "run.cfg")
    back = cfgmod.load(tmp_path / "run.cfg")
    assert back == cfg and back.rl.seed == 9 and back.train.seed == 9


@pytest.mark.parametrize("text,msg", [
    ("env.gps_sigmaa = 1", "unknown key"),
    ("seed 4", "expected"),
    ("seed = 'x'", "does not match"),
    ("rl.alpha = 2", "alpha"),
    ("store.ttl.MEDIUM = 1", "unknown key"),
    ("env = 3", "section"),
    ("seed = foo", "parse|unexpected"),
    ("eval.configs = ('Nope',)", "unknown evaluation"),
])
def test_errors_name_the_line(text, msg):
    with pytest.raises(ConfigError, match=msg) as exc:
        loads("seed = 1\n" + text)
    assert str(exc.value).startswith("line 2:")
