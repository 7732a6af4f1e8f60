"""Command line entry point: ``rlcombo run | simulate | report``.

Exit status is 0 on success, 1 for input parsing or validation problems and
2 for failures while running.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from rlcombo import outputs, plotting
from rlcombo.agent import AgentConfig, RunResult, run
from rlcombo.config import agent_overrides, format_config, read_config
from rlcombo.evaluate import RL, SeriesScore, build_report, mse, rank_experiment, score_series
from rlcombo.panel import (
    SIMPLE_AVERAGE,
    ForecastPanel,
    PanelError,
    append_benchmark_average,
    group_mean_panel,
    load_panels,
    read_group_map,
    write_wide_csv,
)
from rlcombo.synth import generate, read_spec

log = logging.getLogger("rlcombo")


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# arguments
# ---------------------------------------------------------------------------

_AGENT_FLAGS = {
    "alpha": float,
    "eta": float,
    "gamma": float,
    "k_max": int,
    "var_target": float,
    "warmup": int,
    "horizon": int,
    "fallback": str,
    "fallback_model": str,
}


def _add_agent_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("agent")
    g.add_argument("--config", type=Path, help="key=value file; flags override it")
    g.add_argument("--alpha", type=float, help="learning rate in (0, 1] (default 0.1)")
    g.add_argument("--eta", type=float, help="similarity threshold; > 1 disables matching (default 0.95)")
    g.add_argument("--gamma", type=float, help="discount, recorded only (default 0)")
    g.add_argument("--k-max", dest="k_max", type=int, help="max principal components (default 3)")
    g.add_argument("--var-target", dest="var_target", type=float, help="explained variance target (default 0.9)")
    g.add_argument("--warmup", type=int, help="fallback-only origins (default max(k_max + 2, 5))")
    g.add_argument("--horizon", type=int, help="forecast horizon h (default 1)")
    g.add_argument("--fallback", choices=["simple_average", "named_model"])
    g.add_argument("--fallback-model", dest="fallback_model")
    g.add_argument("--no-benchmark-column", dest="benchmark_column", action="store_false",
                   help="do not offer the simple average as a selectable model")
    g.add_argument("--tie-method", choices=["min", "average"], default="min")
    g.add_argument("--score-window", choices=["all", "post-warmup"], default="all")
    g.add_argument("-j", "--jobs", type=int, default=1, help="parallel worker processes")
    g.add_argument("--figures", action="store_true", help="render PNG figures next to the CSVs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlcombo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the agent on one or more panels")
    p.add_argument("inputs", nargs="+", type=Path, help="wide CSV file(s) or directories")
    p.add_argument("--format", choices=["wide-csv", "m4-pair"], default="wide-csv")
    p.add_argument("--group-map", type=Path, help="model,group CSV; models are replaced by group means")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--dump-features", action="store_true")
    p.add_argument("--dump-qtable", action="store_true")
    _add_agent_flags(p)

    p = sub.add_parser("simulate", help="agent vs simple average on synthetic panels")
    p.add_argument("spec", type=Path, help="regime spec (key=value)")
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--seeds", help="comma-separated seeds; overrides --runs")
    p.add_argument("--write-panels", action="store_true")
    p.add_argument("-o", "--out", type=Path, required=True)
    _add_agent_flags(p)

    p = sub.add_parser("report", help="re-aggregate report.csv files and render figures")
    p.add_argument("inputs", nargs="+", type=Path, help="run output directories or report.csv files")
    p.add_argument("--tie-method", choices=["min", "average"], default="min")
    p.add_argument("-o", "--out", type=Path, required=True)
    return parser


def effective_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags."""
    values = {f.name: f.default for f in dataclasses.fields(AgentConfig)}
    if args.config is not None:
        try:
            values.update(agent_overrides(read_config(args.config)))
        except (OSError, ValueError) as e:
            raise InputError(f"config {args.config}: {e}") from e
    for name in _AGENT_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    try:
        cfg = AgentConfig(**values)
    except (TypeError, ValueError) as e:
        raise InputError(str(e)) from e
    return dataclasses.asdict(cfg)


def _prepare_out(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputError(f"cannot create output directory {path}: {e}") from e
    return path


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _one_series(panel: ForecastPanel, cfg_values: dict, window: str, tie: str):
    cfg = AgentConfig(**cfg_values)
    result = run(panel, cfg)
    return result, score_series(panel, result, window=window, tie_method=tie)


def _map_series(panels, cfg_values, args):
    jobs = max(1, args.jobs)
    params = [(p, cfg_values, args.score_window, args.tie_method) for p in panels]
    if jobs == 1 or len(panels) == 1:
        return [_one_series(*a) for a in params]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_one_series, *zip(*params)))


def _load_inputs(args) -> list[ForecastPanel]:
    panels: list[ForecastPanel] = []
    for path in args.inputs:
        if not path.exists():
            raise InputError(f"{path}: no such file or directory")
        panels.extend(load_panels(path, format=args.format))
    ids = [p.series_id for p in panels]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise InputError(f"duplicate series ids across inputs: {dupes[:5]}")
    if args.group_map is not None:
        groups = read_group_map(args.group_map)
        panels = [group_mean_panel(p, groups) for p in panels]
    if args.benchmark_column:
        panels = [p if SIMPLE_AVERAGE in p.model_names else append_benchmark_average(p) for p in panels]
    return panels


def cmd_run(args) -> int:
    cfg_values = effective_config(args)
    try:
        panels = _load_inputs(args)
    except (PanelError, OSError) as e:
        raise InputError(str(e)) from e
    h = cfg_values["horizon"]
    panels = [p if p.horizon == h else p.replace(horizon=h) for p in panels]
    for p in panels:
        if p.T <= AgentConfig(**cfg_values).warmup + h:
            raise InputError(f"series {p.series_id!r} too short (T={p.T}) for warm-up + horizon")
    out = _prepare_out(args.out)
    (out / "effective_config.txt").write_text(format_config(cfg_values), encoding="utf-8")

    results = _map_series(panels, cfg_values, args)
    scores = []
    for panel, (result, score) in zip(panels, results):
        sid = panel.series_id
        outputs.write_forecasts(panel, result, out / f"{sid}_forecast.csv")
        outputs.write_decisions(panel, result, out / f"{sid}_decisions.csv")
        outputs.write_series_report(score, out / f"{sid}_report.csv")
        if args.dump_features:
            outputs.write_features(panel, out / f"{sid}_features.csv")
            outputs.write_embeddings(panel, result, out / f"{sid}_embeddings.csv")
        if args.dump_qtable:
            outputs.write_qtable(panel, result, out / f"{sid}_qtable.csv")
        if args.figures:
            _series_figure(panel, result, out / f"{sid}_forecast.png")
        scores.append(score)
        log.info("%s: RL mse %.6g, rank %s", sid, score.mse[RL], score.ranks[RL])

    report = build_report(scores)
    _write_report_set(report, out, figures=args.figures)
    print(f"{len(scores)} series -> {out}; RL mean rank {report.mean_rank[RL]:.3f}")
    return 0


def _series_figure(panel: ForecastPanel, result: RunResult, path: Path) -> None:
    bench = outputs.benchmark_series(panel, result.config)
    fb = [d.used_fallback for d in result.decisions]
    plotting.plot_forecasts(panel.t_labels, panel.y, result.forecasts, bench, fb, path, title=panel.series_id)


def _write_report_set(report, out: Path, figures: bool) -> None:
    outputs.write_report(report, out / "report.csv")
    outputs.write_aggregate(report, out / "aggregate.csv")
    outputs.write_mse_summary(report, out / "mse_summary.csv")
    outputs.write_json(report.to_dict(), out / "report.json")
    if figures:
        plotting.plot_mean_ranks(report.mean_rank, out / "mean_rank.png")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _simulate_one(spec, seed: int, cfg_values: dict, benchmark_column: bool):
    raw = generate(spec.with_seed(seed))
    panel = append_benchmark_average(raw) if benchmark_column else raw
    result = run(panel, AgentConfig(**cfg_values))
    bench = outputs.benchmark_series(panel, result.config)
    return raw, mse(panel.y, result.forecasts), mse(panel.y, bench)


def cmd_simulate(args) -> int:
    cfg_values = effective_config(args)
    try:
        spec = read_spec(args.spec)
    except (OSError, ValueError) as e:
        raise InputError(f"spec {args.spec}: {e}") from e
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError as e:
            raise InputError(f"--seeds: {e}") from e
    elif args.runs < 1:
        raise InputError("--runs must be at least 1")
    else:
        seeds = [spec.seed + i for i in range(args.runs)]
    if not seeds:
        raise InputError("need at least one run")
    if spec.T <= AgentConfig(**cfg_values).warmup + cfg_values["horizon"]:
        raise InputError(f"spec length {spec.T} too short for warm-up + horizon")
    out = _prepare_out(args.out)
    (out / "effective_config.txt").write_text(format_config(cfg_values), encoding="utf-8")

    params = [(spec, s, cfg_values, args.benchmark_column) for s in seeds]
    if args.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_simulate_one, *zip(*params)))
    else:
        rows = [_simulate_one(*a) for a in params]

    rl = np.array([r[1] for r in rows])
    sa = np.array([r[2] for r in rows])
    wins = rl < sa
    with open(out / "simulate.csv", "w", encoding="utf-8") as fh:
        fh.write(f"seed,rl_mse,{SIMPLE_AVERAGE}_mse,rl_wins\n")
        for seed, a, b, w in zip(seeds, rl, sa, wins):
            fh.write(f"{seed},{a!r},{b!r},{int(w)}\n")
    summary = {
        "runs": len(seeds),
        "win_rate": float(wins.mean()),
        "mean_rl_mse": float(rl.mean()),
        "mean_simple_average_mse": float(sa.mean()),
        "seeds": seeds,
    }
    outputs.write_json(summary, out / "simulate.json")
    if args.write_panels:
        for panel, _, _ in rows:
            write_wide_csv(panel, out / f"{panel.series_id}.csv")
    if args.figures:
        plotting.plot_win_rate(rl, sa, out / "win_rate.png")
    print(f"win rate vs simple average: {summary['win_rate']:.3f} over {len(seeds)} runs")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def cmd_report(args) -> int:
    scores: list[SeriesScore] = []
    for path in args.inputs:
        csv_path = path / "report.csv" if path.is_dir() else path
        try:
            scores.extend(outputs.read_report(csv_path))
        except (OSError, ValueError, KeyError) as e:
            raise InputError(f"{csv_path}: {e}") from e
    if not scores:
        raise InputError("no experiments found")
    for s in scores:
        s.ranks = rank_experiment(s.mse, args.tie_method)
    out = _prepare_out(args.out)
    report = build_report(scores)
    outputs.write_aggregate(report, out / "aggregate.csv")
    outputs.write_json(report.to_dict(), out / "report.json")
    plotting.plot_mean_ranks(report.mean_rank, out / "mean_rank.png")
    print(f"aggregated {len(scores)} experiments -> {out}")
    return 0


COMMANDS = {"run": cmd_run, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
