import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_registry import RESULTS  # noqa: E402


@pytest.fixture(scope="session")
def default_model():
    """The default predictor: 200 episodes of seed-0 data, default training."""
    from ctxbeam.env import EnvConfig, generate_dataset
    from ctxbeam.net import TrainConfig, train_model
    records = generate_dataset(EnvConfig(), 200, seed=0)
    params, curve = train_model(records, TrainConfig(seed=0))
    return params


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def default_policies(default_model):
    """``runs``: seed -> (table, curve, training records) under default costs."""
    import time
    from types import SimpleNamespace

    from ctxbeam.env import STREAM_POLICY, EnvConfig, generate_dataset
    from ctxbeam.policy import RLConfig, train_policy
    out = {}
    start = time.perf_counter()
    for s in range(5):
        rl = RLConfig(seed=s)
        records = generate_dataset(EnvConfig(), rl.episodes, s, stream=STREAM_POLICY)
        table, curve = train_policy(EnvConfig(), default_model, rl, records=records)
        out[s] = (table, curve, records)
    return SimpleNamespace(runs=out, seconds=time.perf_counter() - start)
