"""MSE scoring and cross-experiment rankings."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from rlcombo.agent import RunResult
from rlcombo.panel import ForecastPanel

RL = "RL"


def mse(actual, forecast, mask=None) -> float:
    actual = np.asarray(actual, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    if actual.shape != forecast.shape:
        raise ValueError(f"length mismatch: {actual.shape} vs {forecast.shape}")
    ok = np.ones(actual.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not ok.any():
        raise ValueError("no evaluable points")
    diff = actual[ok] - forecast[ok]
    return float(np.mean(diff**2))


def rank_experiment(scores: Mapping[str, float], method: str = "min") -> dict[str, float]:
    """Rank models by ascending MSE.

    ``method="min"`` gives exact ties the smaller rank and skips the following
    ones (1, 1, 3); ``"average"`` gives tied models the mean of their
    positions.
    """
    if not scores:
        raise ValueError("nothing to rank")
    if method not in ("min", "average"):
        raise ValueError(f"unknown tie method {method!r}")
    names = list(scores)
    ranks = rankdata([scores[m] for m in names], method=method)
    if method == "min":
        return {m: int(r) for m, r in zip(names, ranks)}
    return {m: float(r) for m, r in zip(names, ranks)}


def aggregate_ranks(per_experiment: Sequence[Mapping[str, float]]) -> dict[str, float]:
    if not per_experiment:
        raise ValueError("no experiments to aggregate")
    models = set(per_experiment[0])
    for i, ranks in enumerate(per_experiment[1:], start=1):
        if set(ranks) != models:
            raise ValueError(f"experiment {i} covers a different model set")
    order = list(per_experiment[0])
    return {m: float(np.mean([r[m] for r in per_experiment])) for m in order}


@dataclass
class SeriesScore:
    series_id: str
    mse: dict[str, float]
    ranks: dict[str, float]
    sq_error_sum: dict[str, float]
    n_points: dict[str, int]
    rl_post_warmup_mse: float | None = None


def score_series(
    panel: ForecastPanel,
    result: RunResult,
    window: str = "all",
    tie_method: str = "min",
) -> SeriesScore:
    """Score every panel model plus the agent on one series.

    ``window="all"`` scores the agent on every row, warm-up included;
    ``"post-warmup"`` scores it only on rows it decided by similarity search.
    The post-warm-up figure is always recorded separately.
    """
    if window not in ("all", "post-warmup"):
        raise ValueError(f"unknown window {window!r}")
    mses: dict[str, float] = {}
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for a, name in enumerate(panel.model_names):
        mask = panel.available[:, a]
        mses[name] = mse(panel.y, panel.forecasts[:, a], mask)
        sums[name] = float(np.sum((panel.y[mask] - panel.forecasts[mask, a]) ** 2))
        counts[name] = int(mask.sum())
    post = np.array([d.origin is not None and d.origin > result.config.warmup for d in result.decisions])
    post_mse = mse(panel.y, result.forecasts, post) if post.any() else None
    rl_mask = post if window == "post-warmup" else np.ones(panel.T, dtype=bool)
    if not rl_mask.any():
        raise ValueError("empty post-warm-up window")
    mses[RL] = mse(panel.y, result.forecasts, rl_mask)
    sums[RL] = float(np.sum((panel.y[rl_mask] - result.forecasts[rl_mask]) ** 2))
    counts[RL] = int(rl_mask.sum())
    return SeriesScore(
        series_id=panel.series_id,
        mse=mses,
        ranks=rank_experiment(mses, tie_method),
        sq_error_sum=sums,
        n_points=counts,
        rl_post_warmup_mse=post_mse,
    )


@dataclass
class ScoreReport:
    series: list[SeriesScore]
    mean_rank: dict[str, float] = field(default_factory=dict)
    pooled_mse: dict[str, float] = field(default_factory=dict)
    mean_series_mse: dict[str, float] = field(default_factory=dict)

    @property
    def models(self) -> list[str]:
        return list(self.mean_rank)

    def to_dict(self) -> dict:
        return {
            "experiments": [
                {
                    "series_id": s.series_id,
                    "models": [
                        {"model": m, "mse": s.mse[m], "rank": s.ranks[m]} for m in s.mse
                    ],
                    "rl_post_warmup_mse": s.rl_post_warmup_mse,
                }
                for s in self.series
            ],
            "aggregate": [
                {
                    "model": m,
                    "mean_rank": self.mean_rank[m],
                    "n_experiments": len(self.series),
                    "pooled_mse": self.pooled_mse[m],
                    "mean_series_mse": self.mean_series_mse[m],
                }
                for m in self.models
            ],
        }


def build_report(scores: Sequence[SeriesScore]) -> ScoreReport:
    """Aggregate per-series scores.

    Both aggregation conventions for a pooled figure are computed: squared
    errors pooled over every point of every series, and the plain mean of
    per-series MSEs.
    """
    if not scores:
        raise ValueError("no series scored")
    mean_rank = aggregate_ranks([s.ranks for s in scores])
    pooled = {}
    mean_series = {}
    for m in mean_rank:
        total = sum(s.sq_error_sum[m] for s in scores)
        count = sum(s.n_points[m] for s in scores)
        pooled[m] = total / count
        mean_series[m] = float(np.mean([s.mse[m] for s in scores]))
    return ScoreReport(list(scores), mean_rank, pooled, mean_series)
