import csv
import subprocess
import sys

import pytest

import ctxbeam.net as net
from ctxbeam.cli import OUTPUTS, main

SMALL = """\
env.episode_steps = 20
data.episodes = 3
train.epochs = 2
rl.episodes = 4
rl.parallel_episodes = 2
eval.episodes = 2
eval.seeds = (0, 1)
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return str(p)


def run_all(cfg, out, seed=0):
    common = ["--config", cfg, "--out", str(out), "--seed", str(seed)]
    assert main(["gen-data", *common]) == 0
    assert main(["train-model", *common]) == 0
    assert main(["train-policy", *common]) == 0
    assert main(["eval", *common, "--policy", str(out / OUTPUTS["policy"])]) == 0


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_pipeline_outputs(cfg, tmp_path, capsys):
    out = tmp_path / "a"
    run_all(cfg, out)
    assert len((out / OUTPUTS["dataset"]).read_text().splitlines()) == 60
    assert rows(out / OUTPUTS["loss"]) == [["epoch", "loss"]] + rows(out / OUTPUTS["loss"])[1:]
    assert len(rows(out / OUTPUTS["loss"])) == 1 + 2
    assert len(rows(out / OUTPUTS["curve"])) == 1 + 4
    metrics = rows(out / OUTPUTS["metrics"])
    assert [r[0] for r in metrics[1:]] == ["Only_GPS", "Missing_LiDAR", "Missing_image",
                                          "Full_observation", "RL"]
    gps = dict(zip(metrics[0], metrics[1]))
    assert float(gps["mean_cost"]) == pytest.approx(0.01, abs=1e-15)
    assert "Full_observation" in capsys.readouterr().out


def test_reruns_are_byte_identical(cfg, tmp_path):
    run_all(cfg, tmp_path / "a", seed=5)
    run_all(cfg, tmp_path / "b", seed=5)
    for name in OUTPUTS.values():
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_ten_episodes_of_200_steps(tmp_path):
    assert main(["gen-data", "--out", str(tmp_path), "--episodes", "10", "--seed", "3"]) == 0
    assert len((tmp_path / OUTPUTS["dataset"]).read_text().splitlines()) == 2000


def test_zero_episodes_warns(tmp_path, caplog):
    assert main(["gen-data", "--out", str(tmp_path), "--episodes", "0"]) == 0
    assert (tmp_path / OUTPUTS["dataset"]).read_text() == ""
    assert "zero episodes" in caplog.text


def test_invalid_config_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("rl.alpha = 2\n")
    assert main(["train-policy", "--config", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("ctxbeam: error:") and "line 1" in err and len(err.splitlines()) == 1


def test_missing_inputs(tmp_path, capsys):
    assert main(["train-model", "--out", str(tmp_path)]) == 2
    assert "dataset not found" in capsys.readouterr().err
    assert main(["train-policy", "--out", str(tmp_path)]) == 2
    assert "checkpoint not found" in capsys.readouterr().err


def test_rl_row_needs_policy(cfg, tmp_path, capsys):
    assert main(["eval", "--config", cfg, "--out", str(tmp_path), "--configs", "Only_GPS,RL"]) == 2
    assert "policy" in capsys.readouterr().err


def test_divergence_exits_nonzero(cfg, tmp_path, monkeypatch, capsys):
    assert main(["gen-data", "--config", cfg, "--out", str(tmp_path)]) == 0
    monkeypatch.setattr(net, "loss_and_grad", lambda *a: (float("nan"), {}))
    assert main(["train-model", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "diverged" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ctxbeam", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    for cmd in ("gen-data", "train-model", "train-policy", "eval"):
        assert cmd in res.stdout
