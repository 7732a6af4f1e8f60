"""Report figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "sans-serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # fixed metadata keeps repeated renders byte-identical
    "svg.hashsalt": "rlcombo",
}

RL_COLOR = "#c0392b"
BENCH_COLOR = "#7f8c8d"


def size(scale=1.0, ratio=0.62):
    width = 6.4 * scale
    return width, width * ratio


def new(scale=1.0, ratio=0.62, **kw):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=size(scale, ratio), **kw)
    return fig, ax


def save(fig, path):
    path = Path(path)
    with plt.rc_context(STYLE):
        fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def plot_forecasts(t_labels, y, rl, bench, fallback_mask, path, title=None):
    """Realized series against the agent and the equal-weight benchmark."""
    with plt.rc_context(STYLE):
        fig, ax = new()
        x = np.arange(len(y))
        ax.plot(x, y, color="black", lw=1.2, label="actual")
        ax.plot(x, bench, color=BENCH_COLOR, lw=1, ls="--", label="simple average")
        ax.plot(x, rl, color=RL_COLOR, lw=1, label="RL")
        fb = np.asarray(fallback_mask, dtype=bool)
        if fb.any():
            ax.scatter(x[fb], np.asarray(rl)[fb], s=8, color=BENCH_COLOR, zorder=3, label="fallback used")
        step = max(1, len(x) // 8)
        ax.set_xticks(x[::step])
        ax.set_xticklabels([t_labels[i] for i in x[::step]])
        ax.set_xlabel("t")
        ax.legend(frameon=False, loc="best")
        if title:
            ax.set_title(title)
    return save(fig, path)


def plot_mean_ranks(mean_rank: dict, path, top=20, highlight="RL"):
    """Horizontal bars of mean rank, best first."""
    items = sorted(mean_rank.items(), key=lambda kv: (kv[1], kv[0]))[:top]
    names = [k for k, _ in items][::-1]
    vals = [v for _, v in items][::-1]
    with plt.rc_context(STYLE):
        fig, ax = new(ratio=max(0.3, 0.05 * len(names) + 0.15))
        colors = [RL_COLOR if n == highlight else BENCH_COLOR for n in names]
        ax.barh(names, vals, color=colors)
        ax.set_xlabel("mean rank (lower is better)")
    return save(fig, path)


def plot_win_rate(rl_mse, bench_mse, path):
    """Per-seed agent MSE against benchmark MSE; points below the diagonal are wins."""
    rl_mse = np.asarray(rl_mse, dtype=float)
    bench_mse = np.asarray(bench_mse, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = new(ratio=1.0, scale=0.7)
        wins = rl_mse < bench_mse
        ax.scatter(bench_mse[wins], rl_mse[wins], s=12, color=RL_COLOR, label="RL better")
        ax.scatter(bench_mse[~wins], rl_mse[~wins], s=12, color=BENCH_COLOR, label="RL not better")
        lo = float(min(rl_mse.min(), bench_mse.min()))
        hi = float(max(rl_mse.max(), bench_mse.max()))
        ax.plot([lo, hi], [lo, hi], color="black", lw=0.8)
        ax.set_xlabel("simple average MSE")
        ax.set_ylabel("RL MSE")
        ax.legend(frameon=False, loc="upper left")
    return save(fig, path)
