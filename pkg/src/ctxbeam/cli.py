"""Command-line harness: gen-data, train-model, train-policy, eval.

Every subcommand takes ``--config PATH``, ``--seed N`` and ``--out DIR``.
Outputs land in the output directory under fixed names (``OUTPUTS``) so
the commands chain without extra flags. Exit status is 0 on success, 1 on
a runtime failure and 2 on bad usage or configuration.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .env import SchemaError, export_dataset, generate_dataset, import_dataset
from .metrics import RL_NAME, evaluate, write_reports
from .net import TrainingDiverged, load_checkpoint, save_checkpoint, train_model
from .policy import PolicyTable, train_policy, write_curve

log = logging.getLogger("ctxbeam")

OUTPUTS = {
    "dataset": "dataset.jsonl",
    "checkpoint": "model.json",
    "loss": "loss.csv",
    "policy": "policy.csv",
    "curve": "reward_curve.csv",
    "metrics": "metrics.csv",
}


class UsageError(Exception):
    pass


def _run_config(args) -> config_mod.RunConfig:
    try:
        run = config_mod.load(args.config) if args.config else config_mod.RunConfig()
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    except config_mod.ConfigError as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    if args.seed is not None:
        run = run.with_seed(args.seed)
    return run


def _out_dir(args, run) -> Path:
    out = Path(args.out if args.out is not None else run.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _input(path, default: Path, what: str) -> Path:
    p = Path(path) if path else default
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def cmd_gen_data(args) -> int:
    run = _run_config(args)
    if args.episodes is not None:
        run = replace(run, data=config_mod.DataConfig(args.episodes))
    out = _out_dir(args, run) / OUTPUTS["dataset"]
    records = generate_dataset(run.env, run.data.episodes, run.seed)
    export_dataset(records, out)
    if not records:
        log.warning("zero episodes requested; wrote an empty dataset")
    print(f"wrote {sum(len(r) for r in records)} records ({len(records)} episodes) to {out}")
    return 0


def cmd_train_model(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    path = _input(args.dataset, out / OUTPUTS["dataset"], "dataset")
    records = import_dataset(path, num_beams=run.model.num_beams)
    params, curve = train_model(records, run.train, run.model, log=log.info)
    save_checkpoint(params, out / OUTPUTS["checkpoint"], extra={"seed": run.train.seed})
    write_curve(curve, out / OUTPUTS["loss"], column="loss", index="epoch")
    print(f"trained {run.train.epochs} epochs, final loss {curve[-1] if curve else float('nan'):.4f}")
    return 0


def cmd_train_policy(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    params = load_checkpoint(_input(args.checkpoint, out / OUTPUTS["checkpoint"], "checkpoint"))
    table, curve = train_policy(run.env, params, run.rl, run.costs, run.store)
    table.to_csv(out / OUTPUTS["policy"])
    write_curve(curve, out / OUTPUTS["curve"])
    tail = curve[-50:]
    print(f"trained {len(curve)} episodes, last-50 mean reward {sum(tail) / max(len(tail), 1):.4f}")
    return 0


def cmd_eval(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    configs = tuple(args.configs.split(",")) if args.configs else run.eval.configs
    try:
        config_mod.EvalConfig(run.eval.episodes, run.eval.seeds, configs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table = None
    if RL_NAME in configs:
        if not args.policy:
            raise UsageError("the RL row needs a policy table (--policy PATH)")
        table = PolicyTable.from_csv(_input(args.policy, None, "policy table"))
    params = load_checkpoint(_input(args.checkpoint, out / OUTPUTS["checkpoint"], "checkpoint"))
    reports = []
    for name in configs:
        target = table if name == RL_NAME else name
        reports.append(evaluate(params, target, run.env, run.eval.episodes, run.eval.seeds,
                                run.costs, run.store, run.rl))
        log.info("%s: accuracy %.4f, reward %.4f", name, reports[-1].accuracy,
                 reports[-1].mean_reward)
    write_reports(reports, out / OUTPUTS["metrics"])
    w = csv.writer(sys.stdout)
    for r in reports:
        w.writerow([r.config, f"{r.accuracy:.4f}", f"{r.mean_reward:.4f}", f"{r.mean_cost:.4f}"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxbeam", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run configuration file (dotted key = value lines)")
        p.add_argument("--seed", type=int, help="overrides every seed in the configuration")
        p.add_argument("--out", help="output directory (default: the config's 'out')")
        return p

    p = common(sub.add_parser("gen-data", help="simulate episodes and write a JSONL dataset"))
    p.add_argument("--episodes", type=int, help="overrides data.episodes")
    p.set_defaults(func=cmd_gen_data)
    p = common(sub.add_parser("train-model", help="train the beam predictor"))
    p.add_argument("--dataset", help=f"JSONL dataset (default: OUT/{OUTPUTS['dataset']})")
    p.set_defaults(func=cmd_train_model)
    p = common(sub.add_parser("train-policy", help="learn the acquisition policy"))
    p.add_argument("--checkpoint", help=f"model checkpoint (default: OUT/{OUTPUTS['checkpoint']})")
    p.set_defaults(func=cmd_train_policy)
    p = common(sub.add_parser("eval", help="score fixed configurations and the policy"))
    p.add_argument("--checkpoint", help=f"model checkpoint (default: OUT/{OUTPUTS['checkpoint']})")
    p.add_argument("--policy", help="policy table CSV (required for the RL row)")
    p.add_argument("--configs", help="comma-separated subset, e.g. Only_GPS,RL")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if getattr(args, "episodes", None) is not None and args.episodes < 0:
        parser.error("--episodes must be nonnegative")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ctxbeam: error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"ctxbeam: training diverged: {exc}", file=sys.stderr)
        return 1
    except (SchemaError, ValueError, OSError) as exc:
        print(f"ctxbeam: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
