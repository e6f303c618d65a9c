"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime error or training
divergence, 3 file I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import ExperimentConfig, load_config, parse_assignments, parse_lines
from .dashboard import export_dashboard, read_episode_csv, write_episode_csv
from .errors import ComparisonError, ConfigError, HedgeLabError, ParameterError, TrainingError
from .evaluation import compare_agents, evaluate_agent
from .metrics import JsonlWriter, dumps_record, read_jsonl, summarize
from .runs import (
    COMPARISON_FILE,
    DASHBOARD_FILE,
    EPISODE_FILE,
    METRICS_FILE,
    run_baseline,
    run_training,
)

log = logging.getLogger("hedgelab")

TRAIN_COMMANDS = {
    "train-single": "single",
    "train-skew": "skew",
    "train-price-of-risk": "price_of_risk",
    "train-portfolio": "portfolio",
}
BASELINE_COMMANDS = {"run-dummy": "dummy", "run-random": "random"}


def _common(p: argparse.ArgumentParser, out_help: str = "output directory") -> None:
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int, help="run seed (overrides run.seed)")
    p.add_argument("--out", type=Path, help=out_help)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="config override, repeatable (e.g. --set market.sigma=0.03)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hedgelab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, mode in TRAIN_COMMANDS.items():
        p = sub.add_parser(name, help=f"train a {mode} agent")
        _common(p)
        p.add_argument("--epochs", type=int, help="training epochs (overrides sac.epochs)")
    for name, mode in BASELINE_COMMANDS.items():
        p = sub.add_parser(name, help=f"evaluate the {mode} baseline")
        _common(p)
        p.add_argument("--episodes", type=int, help="evaluation episodes")
    p = sub.add_parser("eval", help="evaluate a saved agent")
    p.add_argument("checkpoint", type=Path)
    _common(p, "write evaluation.jsonl (and episode CSVs) here")
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--episode-csv", action="store_true", help="also write one CSV per episode")
    p = sub.add_parser("compare", help="run two saved agents on shared market seeds")
    p.add_argument("checkpoint_a", type=Path)
    p.add_argument("checkpoint_b", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=30, help="number of shared seeds")
    p.add_argument("--out", type=Path, help="directory for comparison.csv")
    p = sub.add_parser("export", help="render dashboard.svg for a run directory")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--out", type=Path, help="destination directory (default: run_dir)")
    return parser


def _experiment(args, mode: str | None = None) -> ExperimentConfig:
    overrides = parse_assignments(args.set)
    if mode is not None:
        overrides["run.mode"] = mode
    if getattr(args, "seed", None) is not None:
        overrides["run.seed"] = str(args.seed)
    if getattr(args, "epochs", None) is not None:
        overrides["sac.epochs"] = str(args.epochs)
    if getattr(args, "episodes", None) is not None and mode in BASELINE_COMMANDS.values():
        overrides["run.eval_episodes"] = str(args.episodes)
    return load_config(args.config, overrides)


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    if args.out is not None:
        return args.out
    return Path(cfg.run.out) / f"{cfg.mode}_seed{cfg.run.seed}"


def _checkpoint_config(header: dict, args=None) -> ExperimentConfig:
    flat = dict(header.get("config", {}))
    if args is not None:
        if args.config is not None:
            flat.update(parse_lines(args.config.read_text(), str(args.config)))
        flat.update(parse_assignments(args.set))
    return ExperimentConfig.from_flat(flat)


def cmd_train(args, mode: str) -> int:
    cfg = _experiment(args, mode)
    out = _out_dir(args, cfg)
    try:
        result = run_training(cfg, out)
    except TrainingError as err:
        print(f"training diverged: {err}; partial metrics in {out / METRICS_FILE}", file=sys.stderr)
        return 2
    last = result.metrics[-1] if result.metrics else {}
    print(json.dumps({"out": str(out), "epochs": len(result.metrics),
                      "final_mean_reward": last.get("mean_reward")}))
    return 0


def cmd_baseline(args, mode: str) -> int:
    cfg = _experiment(args, mode)
    out = _out_dir(args, cfg)
    result = run_baseline(cfg, out)
    print(dumps_record({"out": str(out), **result.metrics[0]}))
    return 0


def cmd_eval(args) -> int:
    agent, header = load_checkpoint(args.checkpoint)
    cfg = _checkpoint_config(header, args)
    seed = args.seed if args.seed is not None else cfg.run.seed
    results = evaluate_agent(agent, cfg, args.episodes, seed)
    summary = summarize(results)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        with JsonlWriter(args.out / "evaluation.jsonl") as w:
            for i, r in enumerate(results):
                w.write({"episode": i, "seed": r.seed, "total_reward": r.total_reward,
                         "net_pnl": r.net_pnl, "mean_abs_position": r.mean_abs_position,
                         "steps": r.steps})
            w.write({"summary": True, **summary})
        if args.episode_csv:
            for i, r in enumerate(results):
                write_episode_csv(r.records, args.out / f"episode_{i:04d}.csv")
    print(dumps_record(summary))
    return 0


def cmd_compare(args) -> int:
    agent_a, ha = load_checkpoint(args.checkpoint_a)
    agent_b, hb = load_checkpoint(args.checkpoint_b)
    report = compare_agents(agent_a, _checkpoint_config(ha), agent_b, _checkpoint_config(hb),
                            args.episodes, args.seed)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / COMPARISON_FILE)
    print(dumps_record(report.summary()))
    return 0


def cmd_export(args) -> int:
    records = read_episode_csv(args.run_dir / EPISODE_FILE)
    metrics_path = args.run_dir / METRICS_FILE
    history = None
    if metrics_path.exists():
        history = [m.get("mean_reward") for m in read_jsonl(metrics_path) if "epoch" in m]
    out = args.out or args.run_dir
    out.mkdir(parents=True, exist_ok=True)
    if out != args.run_dir:
        write_episode_csv(records, out / EPISODE_FILE)
    export_dashboard(records, out / DASHBOARD_FILE, history, title=str(args.run_dir.name))
    print(str(out / DASHBOARD_FILE))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in TRAIN_COMMANDS:
            return cmd_train(args, TRAIN_COMMANDS[args.command])
        if args.command in BASELINE_COMMANDS:
            return cmd_baseline(args, BASELINE_COMMANDS[args.command])
        return {"eval": cmd_eval, "compare": cmd_compare, "export": cmd_export}[args.command](args)
    except (ConfigError, ParameterError, ComparisonError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 3
    except HedgeLabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
