"""Run directories: training and baseline runs that leave files on disk.

A training run directory holds exactly ``config.txt`` (the full config
snapshot), ``checkpoint.bin``, ``metrics.jsonl`` and ``episode.csv`` (one
deterministic evaluation episode of the trained agent). Baseline runs have
no checkpoint; their ``metrics.jsonl`` holds one evaluation summary line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .dashboard import write_episode_csv
from .evaluation import (
    agent_policy,
    env_factory,
    evaluate_policy,
    heuristic_policy,
    make_env,
    random_policy,
)
from .metrics import JsonlWriter, summarize
from .sac.agent import SacAgent
from .sac.train import EpisodeResult, evaluation_seeds, run_episode, train

log = logging.getLogger(__name__)

CONFIG_FILE = "config.txt"
CHECKPOINT_FILE = "checkpoint.bin"
METRICS_FILE = "metrics.jsonl"
EPISODE_FILE = "episode.csv"
DASHBOARD_FILE = "dashboard.svg"
COMPARISON_FILE = "comparison.csv"


@dataclass
class RunResult:
    out_dir: Path
    metrics: list[dict]
    episode: EpisodeResult
    agent: SacAgent | None = None


def run_training(cfg: ExperimentConfig, out_dir: str | Path) -> RunResult:
    """Train per ``cfg.mode``. On divergence the config and the metrics of
    completed epochs stay on disk and ``TrainingError`` propagates."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(cfg.dumps(), encoding="utf-8")
    seed = cfg.run.seed
    with JsonlWriter(out / METRICS_FILE) as writer:
        result = train(env_factory(cfg), cfg.sac, seed, on_epoch=writer.write)
    agent = result.agent
    save_checkpoint(out / CHECKPOINT_FILE, agent, cfg.to_flat())
    episode = run_episode(make_env(cfg), agent_policy(agent), evaluation_seeds(seed, 1)[0])
    write_episode_csv(episode.records, out / EPISODE_FILE)
    log.info("run written to %s", out)
    return RunResult(out, result.metrics, episode, agent)


def run_baseline(cfg: ExperimentConfig, out_dir: str | Path) -> RunResult:
    """Evaluate the heuristic hedger (mode ``dummy``) or uniform random
    actions (mode ``random``) over ``run.eval_episodes`` episodes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(cfg.dumps(), encoding="utf-8")
    env = make_env(cfg)
    policy = heuristic_policy(env) if cfg.mode == "dummy" else random_policy(env, cfg.run.seed)
    n = max(cfg.run.eval_episodes, 1)
    results = evaluate_policy(env, policy, evaluation_seeds(cfg.run.seed, n))
    summary = {"policy": cfg.mode, **summarize(results)}
    with JsonlWriter(out / METRICS_FILE) as writer:
        writer.write(summary)
    write_episode_csv(results[0].records, out / EPISODE_FILE)
    return RunResult(out, [summary], results[0])
