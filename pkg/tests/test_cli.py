import csv
import json

import pytest

from conftest import random_panel
from rlcombo import cli
from rlcombo.panel import write_wide_csv
from rlcombo.synth import format_spec, two_regime_swap


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def panel_file(tmp_path, rng):
    path = tmp_path / "s1.csv"
    write_wide_csv(random_panel(rng, T=40, n=3, p_missing=0.1, series_id="s1"), path)
    return path


@pytest.fixture
def panel_dir(tmp_path, rng):
    d = tmp_path / "panels"
    d.mkdir()
    for i in range(4):
        write_wide_csv(random_panel(rng, T=30, n=3, series_id=f"p{i}"), d / f"p{i}.csv")
    return d


def test_run_single_file(tmp_path, panel_file):
    out = tmp_path / "out"
    assert cli.main(["run", str(panel_file), "-o", str(out)]) == 0
    for name in ("s1_forecast.csv", "s1_decisions.csv", "report.csv", "aggregate.csv"):
        assert (out / name).is_file()
    dec = _csv(out / "s1_decisions.csv")
    assert list(dec[0]) == ["t", "similarity", "matched_t0", "action", "used_fallback", "forecast"]
    assert len(dec) == 40
    agg = _csv(out / "aggregate.csv")
    assert list(agg[0]) == ["model", "mean_rank", "n_experiments"]
    assert {r["model"] for r in agg} == {"m1", "m2", "m3", "simple_average", "RL"}
    rep = json.loads((out / "report.json").read_text())
    assert rep["experiments"][0]["series_id"] == "s1"
    assert "alpha = 0.1" in (out / "effective_config.txt").read_text()


def test_unattainable_eta_equals_average(tmp_path, panel_dir):
    out = tmp_path / "out"
    assert cli.main(["run", str(panel_dir), "-o", str(out), "--eta", "2.0"]) == 0
    for i in range(4):
        rows = _csv(out / f"p{i}_forecast.csv")
        assert all(r["RL"] == r["simple_average"] for r in rows)
        assert all(r["used_fallback"] == "1" for r in _csv(out / f"p{i}_decisions.csv"))
    mse = {(r["series_id"], r["model"]): r["mse"] for r in _csv(out / "report.csv")}
    assert all(mse[(f"p{i}", "RL")] == mse[(f"p{i}", "simple_average")] for i in range(4))


def test_deterministic_and_parallel_invariant(tmp_path, panel_dir):
    outs = []
    for tag, jobs in (("a", "1"), ("b", "1"), ("c", "3")):
        out = tmp_path / tag
        assert cli.main(["run", str(panel_dir), "-o", str(out), "-j", jobs, "--figures",
                         "--dump-qtable", "--dump-features"]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[2].iterdir())
    for name in names:
        ref = (outs[0] / name).read_bytes()
        assert (outs[1] / name).read_bytes() == ref, name
        assert (outs[2] / name).read_bytes() == ref, name


def test_config_precedence(tmp_path, panel_file):
    cfg = tmp_path / "agent.cfg"
    cfg.write_text("# tuned\nalpha = 0.3\neta = 0.5\n")
    out = tmp_path / "out"
    assert cli.main(["run", str(panel_file), "-o", str(out), "--config", str(cfg), "--eta", "0.7"]) == 0
    eff = (out / "effective_config.txt").read_text()
    assert "alpha = 0.3" in eff and "eta = 0.7" in eff


def test_validation_errors_exit_1(tmp_path, panel_file, capsys):
    assert cli.main(["run", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "o")]) == 1
    assert cli.main(["run", str(panel_file), "-o", str(tmp_path / "o"), "--alpha", "0"]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("t,y,m1\n1,1,x\n")
    assert cli.main(["run", str(bad), "-o", str(tmp_path / "o")]) == 1
    assert "bad.csv:2" in capsys.readouterr().err


def test_runtime_error_exit_2(tmp_path, panel_file, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["run", str(panel_file), "-o", str(tmp_path / "o")]) == 2


def test_group_map_run(tmp_path, rng):
    panel = random_panel(rng, T=30, n=6, p_missing=0.2, series_id="spf")
    write_wide_csv(panel, tmp_path / "spf.csv")
    gm = tmp_path / "groups.csv"
    gm.write_text("model,group\n" + "".join(f"m{i + 1},Industry {i // 2 + 1}\n" for i in range(6)))
    out = tmp_path / "out"
    assert cli.main(["run", str(tmp_path / "spf.csv"), "--group-map", str(gm), "-o", str(out)]) == 0
    models = {r["model"] for r in _csv(out / "spf_report.csv")}
    assert models == {"Industry 1", "Industry 2", "Industry 3", "simple_average", "RL"}


def test_m4_pair_run(tmp_path, rng):
    root = tmp_path / "m4"
    (root / "forecasts").mkdir(parents=True)
    y = rng.normal(50, 3, (3, 20))
    with open(root / "actuals.csv", "w") as fh:
        for i, row in enumerate(y):
            fh.write(",".join([f"H{i + 1}"] + [repr(float(v)) for v in row]) + "\n")
    for m in range(4):
        with open(root / "forecasts" / f"team{m}.csv", "w") as fh:
            for i, row in enumerate(y):
                fh.write(",".join([f"H{i + 1}"] + [repr(float(v + rng.normal())) for v in row]) + "\n")
    out = tmp_path / "out"
    assert cli.main(["run", str(root), "--format", "m4-pair", "-o", str(out)]) == 0
    agg = _csv(out / "aggregate.csv")
    assert len(agg) == 6 and all(r["n_experiments"] == "3" for r in agg)
    summary = _csv(out / "mse_summary.csv")
    assert list(summary[0]) == ["model", "pooled_mse", "mean_series_mse", "n_experiments"]


def test_simulate(tmp_path):
    spec = tmp_path / "two.spec"
    spec.write_text(format_spec(two_regime_swap(length=60)))
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", str(spec), "--seeds", "3,5,8", "-o", str(a), "--figures"]) == 0
    assert cli.main(["simulate", str(spec), "--seeds", "3,5,8", "-o", str(b), "-j", "2", "--figures"]) == 0
    for name in ("simulate.csv", "simulate.json", "win_rate.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    summary = json.loads((a / "simulate.json").read_text())
    assert summary["runs"] == 3 and 0 <= summary["win_rate"] <= 1


def test_simulate_zero_runs(tmp_path):
    spec = tmp_path / "two.spec"
    spec.write_text(format_spec(two_regime_swap(length=60)))
    assert cli.main(["simulate", str(spec), "--runs", "0", "-o", str(tmp_path / "o")]) == 1


def test_simulate_writes_reloadable_panels(tmp_path):
    spec = tmp_path / "two.spec"
    spec.write_text(format_spec(two_regime_swap(length=30)))
    out = tmp_path / "sim"
    assert cli.main(["simulate", str(spec), "--runs", "2", "--write-panels", "-o", str(out)]) == 0
    assert cli.main(["run", str(out / "synth_0.csv"), str(out / "synth_1.csv"), "-o", str(tmp_path / "r")]) == 0


def test_report_reaggregates(tmp_path, panel_dir):
    run_out = tmp_path / "run"
    assert cli.main(["run", str(panel_dir), "-o", str(run_out)]) == 0
    rep = tmp_path / "rep"
    assert cli.main(["report", str(run_out), "-o", str(rep)]) == 0
    assert (rep / "mean_rank.png").is_file()
    original = {r["model"]: float(r["mean_rank"]) for r in _csv(run_out / "aggregate.csv")}
    again = {r["model"]: float(r["mean_rank"]) for r in _csv(rep / "aggregate.csv")}
    assert again == pytest.approx(original)
    assert cli.main(["report", str(tmp_path / "nothing"), "-o", str(rep)]) == 1
