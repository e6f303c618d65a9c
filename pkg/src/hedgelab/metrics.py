"""Performance statistics and JSON-lines metric files."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError


def step_returns(pnl_series: Sequence[float]) -> np.ndarray:
    return np.diff(np.asarray(pnl_series, dtype=float))


def sharpe_ratio(pnl_series: Sequence[float]) -> float:
    """Mean over sample standard deviation of per-step PNL changes.

    Returns NaN when the changes have no dispersion.
    """
    if len(pnl_series) < 3:
        raise ParameterError("need at least 3 PNL observations for a Sharpe ratio")
    r = step_returns(pnl_series)
    sd = float(np.std(r, ddof=1))
    if sd == 0 or not math.isfinite(sd):
        return math.nan
    return float(np.mean(r)) / sd


def _clean(value):
    """JSON-safe scalar: numpy types to Python, non-finite floats to None."""
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps_record(record: dict) -> str:
    return json.dumps({k: _clean(v) for k, v in record.items()})


class JsonlWriter:
    """Appends one JSON object per line, flushing after each so partial runs
    keep their history."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8")

    def write(self, record: dict) -> None:
        self._fh.write(dumps_record(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _mean_sd(xs: Iterable[float]) -> tuple[float | None, float | None]:
    xs = [x for x in xs if x is not None and math.isfinite(x)]
    if not xs:
        return None, None
    sd = float(np.std(xs, ddof=1)) if len(xs) > 1 else 0.0
    return float(np.mean(xs)), sd


def summarize(results) -> dict:
    """Aggregate a list of ``EpisodeResult``; empty input gives an empty summary."""
    out = {"episodes": len(results)}
    if not results:
        for k in ("mean_reward", "std_reward", "mean_net_pnl", "std_net_pnl", "mean_sharpe",
                  "mean_abs_position"):
            out[k] = None
        return out
    out["mean_reward"], out["std_reward"] = _mean_sd(r.total_reward for r in results)
    out["mean_net_pnl"], out["std_net_pnl"] = _mean_sd(r.net_pnl for r in results)
    sharpes = [sharpe_ratio(r.pnl_series) for r in results if len(r.pnl_series) >= 3]
    out["mean_sharpe"] = _mean_sd(sharpes)[0]
    out["mean_abs_position"] = float(np.mean([r.mean_abs_position for r in results]))
    return out


def confidence_interval(xs: Sequence[float], z: float = 1.96) -> tuple[float, float]:
    """Normal-approximation interval for the mean."""
    xs = np.asarray(xs, dtype=float)
    half = z * np.std(xs, ddof=1) / math.sqrt(len(xs))
    m = float(np.mean(xs))
    return m - half, m + half
