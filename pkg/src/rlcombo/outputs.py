"""Delimited and JSON writers for run artifacts.

Time columns in the decision log and forecast files are panel time labels of
the period being forecast.  ``matched_t0`` uses the same convention: it names
the forecast period of the Q-row that was reused.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from rlcombo.agent import AgentConfig, RunResult, fallback_forecast
from rlcombo.embedding import build_features
from rlcombo.evaluate import RL, ScoreReport, SeriesScore
from rlcombo.panel import SIMPLE_AVERAGE, ForecastPanel

DECISION_HEADER = ["t", "similarity", "matched_t0", "action", "used_fallback", "forecast"]


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def decision_rows(panel: ForecastPanel, result: RunResult) -> list[list[str]]:
    h = result.config.horizon
    rows = []
    for d in result.decisions:
        matched = "" if d.matched_t0 is None else panel.t_labels[d.matched_t0 + h - 1]
        action = "" if d.action is None else panel.model_names[d.action]
        rows.append(
            [
                panel.t_labels[d.target - 1],
                _num(d.similarity),
                matched,
                action,
                "1" if d.used_fallback else "0",
                _num(d.forecast),
            ]
        )
    return rows


def write_decisions(panel: ForecastPanel, result: RunResult, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(DECISION_HEADER)
        w.writerows(decision_rows(panel, result))


def benchmark_series(panel: ForecastPanel, cfg: AgentConfig) -> np.ndarray:
    avg_cfg = dataclasses.replace(cfg, fallback="simple_average", fallback_model=None)
    return np.array([fallback_forecast(panel, t, avg_cfg) for t in range(1, panel.T + 1)])


def write_forecasts(panel: ForecastPanel, result: RunResult, path: Path) -> None:
    avg = benchmark_series(panel, result.config)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["t", "y", RL, SIMPLE_AVERAGE])
        for i in range(panel.T):
            w.writerow([panel.t_labels[i], _num(panel.y[i]), _num(result.forecasts[i]), _num(avg[i])])


def write_qtable(panel: ForecastPanel, result: RunResult, path: Path) -> None:
    k_max = max((r.embedding.scores.size for r in result.qtable.rows if r.embedding), default=0)
    h = result.config.horizon
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["origin", "t", "k", *[f"pc{i + 1}" for i in range(k_max)],
                    *[f"q_{m}" for m in panel.model_names]])
        for r in result.qtable.rows:
            scores = list(r.embedding.scores) if r.embedding else []
            w.writerow(
                [panel.t_labels[r.t - 1], panel.t_labels[r.t + h - 1], len(scores),
                 *[_num(s) for s in scores], *[""] * (k_max - len(scores)),
                 *["" if np.isnan(v) else _num(v) for v in r.q]]
            )


def write_embeddings(panel: ForecastPanel, result: RunResult, path: Path) -> None:
    """``t,pc1..pck`` with ``t`` the origin label; short rows are blank-padded."""
    rows = [r for r in result.qtable.rows if r.embedding is not None]
    k_max = max((r.embedding.scores.size for r in rows), default=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["t", *[f"pc{i + 1}" for i in range(k_max)]])
        for r in rows:
            s = [_num(v) for v in r.embedding.scores]
            w.writerow([panel.t_labels[r.t - 1], *s, *[""] * (k_max - len(s))])


def write_features(panel: ForecastPanel, path: Path) -> None:
    feats = build_features(panel, panel.T)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["feature", *panel.t_labels])
        for name, row in zip(feats.feature_names, feats.values):
            w.writerow([name, *[_num(v) for v in row]])


def write_series_report(score: SeriesScore, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["model", "mse", "rank"])
        for m, v in score.mse.items():
            w.writerow([m, _num(v), score.ranks[m]])


def write_report(report: ScoreReport, path: Path) -> None:
    """Long-form per-experiment report, one block per series."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["series_id", "model", "mse", "rank"])
        for s in report.series:
            for m, v in s.mse.items():
                w.writerow([s.series_id, m, _num(v), s.ranks[m]])


def write_aggregate(report: ScoreReport, path: Path) -> None:
    n = len(report.series)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["model", "mean_rank", "n_experiments"])
        for m in sorted(report.models, key=lambda m: (report.mean_rank[m], m)):
            w.writerow([m, _num(report.mean_rank[m]), n])


def write_mse_summary(report: ScoreReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["model", "pooled_mse", "mean_series_mse", "n_experiments"])
        for m in sorted(report.models, key=lambda m: (report.pooled_mse[m], m)):
            w.writerow([m, _num(report.pooled_mse[m]), _num(report.mean_series_mse[m]), len(report.series)])


def write_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def read_report(path: Path) -> list[SeriesScore]:
    """Rebuild per-series scores from a long-form ``report.csv``.

    Only MSEs and ranks survive the round trip; the pooled aggregate needs the
    point counts and is therefore approximated by the series mean.
    """
    by_series: dict[str, SeriesScore] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["series_id", "model", "mse", "rank"]:
            raise ValueError(f"{path}: header must be 'series_id,model,mse,rank'")
        for row in reader:
            s = by_series.setdefault(row["series_id"], SeriesScore(row["series_id"], {}, {}, {}, {}))
            v = float(row["mse"])
            s.mse[row["model"]] = v
            s.ranks[row["model"]] = float(row["rank"]) if "." in row["rank"] else int(row["rank"])
            s.sq_error_sum[row["model"]] = v
            s.n_points[row["model"]] = 1
    return list(by_series.values())
