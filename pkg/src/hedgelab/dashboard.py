"""Episode CSV export and a static multi-panel SVG dashboard."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .env import EPISODE_COLUMNS, SPREAD_COLUMNS
from .portfolio import PORTFOLIO_COLUMNS


def episode_columns(records: Sequence[dict]) -> list[str]:
    """Fixed column order for a record list, chosen by which fields it has."""
    if not records:
        return list(EPISODE_COLUMNS)
    first = records[0]
    if "portfolio_value" in first:
        return list(PORTFOLIO_COLUMNS)
    cols = list(EPISODE_COLUMNS)
    if "maker_spread" in first:
        cols += list(SPREAD_COLUMNS)
    return cols


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_episode_csv(records: Sequence[dict], path: str | Path) -> list[str]:
    cols = episode_columns(records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_cell(r[c]) for c in cols])
    return cols


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_episode_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        rec = {}
        for k, v in row.items():
            if k == "step":
                rec[k] = int(v)
            elif k == "done":
                rec[k] = v == "1"
            else:
                rec[k] = _number(v)
        out.append(rec)
    return out


def export_dashboard(records: Sequence[dict], path: str | Path,
                     reward_history: Sequence[float | None] | None = None,
                     title: str = "") -> None:
    """Panels: quotes, positions, cumulative PNL components, per-step reward,
    plus maker/taker spreads and training reward history when available."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = {k: np.array([r[k] for r in records], dtype=float)
            for k in episode_columns(records) if k != "done"}
    step = cols["step"]
    panels = ["prices", "positions", "pnl", "reward"]
    if "maker_spread" in cols:
        panels.append("spreads")
    if reward_history:
        panels.append("history")

    plt.rcParams["svg.hashsalt"] = "hedgelab"
    fig, axes = plt.subplots(len(panels), 1, figsize=(9, 2.3 * len(panels)), squeeze=False)
    for ax, panel in zip(axes[:, 0], panels):
        if panel == "prices":
            ax.plot(step, cols["mid"], label="mid", color="black")
            ax.plot(step, cols["client_bid"], label="client bid", lw=0.8)
            ax.plot(step, cols["client_ask"], label="client ask", lw=0.8)
            ax.plot(step, cols["hedge_bid"], label="hedge bid", lw=0.8, ls="--")
            ax.plot(step, cols["hedge_ask"], label="hedge ask", lw=0.8, ls="--")
            ax.set_ylabel("price")
        elif panel == "positions":
            ax.plot(step, cols["client_pos"], label="client")
            ax.plot(step, cols["hedge_pos"], label="hedge")
            ax.plot(step, cols["net_pos"], label="net", color="black")
            ax.set_ylabel("position")
        elif panel == "pnl":
            for k in ("client_pnl", "hedge_pnl", "market_pnl"):
                ax.plot(step, cols[k], label=k.replace("_pnl", ""))
            ax.plot(step, cols["net_pnl"], label="net", color="black")
            ax.set_ylabel("cumulative PNL")
        elif panel == "reward":
            ax.plot(step, cols["reward"], label="reward", lw=0.8)
            ax.plot(step, -cols["penalty"], label="-penalty", lw=0.8)
            ax.set_ylabel("per step")
        elif panel == "spreads":
            ax.plot(step, cols["maker_spread"], label="maker")
            ax.plot(step, cols["taker_spread"], label="taker")
            ax.set_ylabel("half-spread")
        elif panel == "history":
            ys = [np.nan if y is None else y for y in reward_history]
            ax.plot(np.arange(len(ys)), ys, marker="o", label="mean episode reward")
            ax.set_xlabel("epoch")
            ax.set_ylabel("reward")
        ax.legend(loc="best", fontsize=7)
        ax.grid(alpha=0.3)
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
