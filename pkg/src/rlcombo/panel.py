"""Forecast panels: realized targets plus a matrix of competing forecasts.

A panel holds ``T`` realized values ``y`` and a ``T x n`` matrix whose entry
``(t, a)`` is model ``a``'s forecast of ``y[t]``, issued ``horizon`` periods
earlier.  Missing forecasts are tracked with a boolean ``available`` mask
(the stored value under a false mask entry is NaN and never read).

Two on-disk formats are supported:

wide-csv
    ``t,y,<model1>,...,<modeln>``; an empty cell is a missing forecast.
m4-pair
    A directory holding ``actuals.csv`` (series id followed by values) and a
    ``forecasts/`` subdirectory with one CSV per method laid out the same
    way.  The method name is the file stem.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIMPLE_AVERAGE = "simple_average"


class PanelError(ValueError):
    """Raised for malformed or inconsistent panel input."""


@dataclass(frozen=True)
class ForecastPanel:
    series_id: str
    y: np.ndarray
    forecasts: np.ndarray
    available: np.ndarray
    model_names: tuple[str, ...]
    horizon: int = 1
    t_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        fc = np.array(self.forecasts, dtype=float)
        avail = np.asarray(self.available, dtype=bool)
        if fc.ndim != 2 or y.ndim != 1 or fc.shape[0] != y.shape[0]:
            raise PanelError(f"shape mismatch: y {y.shape}, forecasts {fc.shape}")
        if avail.shape != fc.shape:
            raise PanelError(f"mask shape {avail.shape} != forecasts shape {fc.shape}")
        names = tuple(self.model_names)
        if len(names) != fc.shape[1]:
            raise PanelError(f"{len(names)} model names for {fc.shape[1]} columns")
        if len(set(names)) != len(names):
            raise PanelError(f"duplicate model names in {names}")
        if self.horizon < 1:
            raise PanelError("horizon must be a positive integer")
        if not np.all(np.isfinite(y)):
            raise PanelError("y has missing or non-finite entries")
        if avail.shape[0] and not avail.any(axis=1).all():
            bad = int(np.flatnonzero(~avail.any(axis=1))[0])
            raise PanelError(f"row {bad} has no available forecast")
        if not np.all(np.isfinite(fc[avail])):
            raise PanelError("available forecasts must be finite")
        fc[~avail] = np.nan
        labels = tuple(self.t_labels) or tuple(str(i + 1) for i in range(len(y)))
        if len(labels) != len(y):
            raise PanelError(f"{len(labels)} time labels for {len(y)} rows")
        for arr in (y, fc, avail):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "forecasts", fc)
        object.__setattr__(self, "available", avail)
        object.__setattr__(self, "model_names", names)
        object.__setattr__(self, "t_labels", labels)

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def n(self) -> int:
        return self.forecasts.shape[1]

    def column(self, name: str) -> int:
        try:
            return self.model_names.index(name)
        except ValueError:
            raise KeyError(f"model {name!r} not in panel {self.series_id!r}") from None

    def replace(self, **changes) -> ForecastPanel:
        kwargs = dict(
            series_id=self.series_id,
            y=self.y,
            forecasts=self.forecasts,
            available=self.available,
            model_names=self.model_names,
            horizon=self.horizon,
            t_labels=self.t_labels,
        )
        kwargs.update(changes)
        return ForecastPanel(**kwargs)


def available_mean(values: np.ndarray, mask: np.ndarray) -> float:
    """Mean of ``values`` where ``mask`` is true.

    Every equal-weight average in the package goes through here so that the
    fallback forecast and the benchmark column agree bit for bit.
    """
    picked = np.asarray(values, dtype=float)[np.asarray(mask, dtype=bool)]
    if picked.size == 0:
        raise PanelError("no available values to average")
    return float(np.sum(picked) / picked.size)


def append_benchmark_average(panel: ForecastPanel) -> ForecastPanel:
    """Return ``panel`` with an extra ``simple_average`` model column."""
    if SIMPLE_AVERAGE in panel.model_names:
        raise PanelError(f"panel already has a {SIMPLE_AVERAGE!r} column")
    avg = np.array(
        [available_mean(panel.forecasts[t], panel.available[t]) for t in range(panel.T)]
    )
    return panel.replace(
        forecasts=np.column_stack([panel.forecasts, avg]),
        available=np.column_stack([panel.available, np.ones(panel.T, dtype=bool)]),
        model_names=panel.model_names + (SIMPLE_AVERAGE,),
    )


def group_mean_panel(panel: ForecastPanel, groups: Mapping[str, str]) -> ForecastPanel:
    """Collapse member forecasts into one equal-weight column per group.

    Group columns appear in order of first appearance in ``groups``.  A group
    cell is unavailable when none of its members is available at that row;
    rows where every group is unavailable are rejected.
    """
    unknown = [m for m in groups if m not in panel.model_names]
    if unknown:
        raise PanelError(f"group map names models not in panel: {unknown}")
    labels: list[str] = []
    members: dict[str, list[int]] = {}
    for model, group in groups.items():
        if group not in members:
            labels.append(group)
            members[group] = []
        members[group].append(panel.column(model))
    fc = np.full((panel.T, len(labels)), np.nan)
    avail = np.zeros((panel.T, len(labels)), dtype=bool)
    for g, label in enumerate(labels):
        # sorted member order keeps the mean independent of map order
        cols = sorted(members[label])
        sub_f = panel.forecasts[:, cols]
        sub_a = panel.available[:, cols]
        for t in range(panel.T):
            if sub_a[t].any():
                fc[t, g] = available_mean(sub_f[t], sub_a[t])
                avail[t, g] = True
    return panel.replace(forecasts=fc, available=avail, model_names=tuple(labels))


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise PanelError(f"{where}: cannot parse {text!r} as a number") from None


def _check_increasing(labels: Sequence[str], path: Path) -> None:
    try:
        keys: list = [float(s) for s in labels]
    except ValueError:
        keys = list(labels)
    for i in range(1, len(keys)):
        if not keys[i] > keys[i - 1]:
            raise PanelError(
                f"{path}: time index not strictly increasing at {labels[i - 1]!r} -> {labels[i]!r}"
            )


def _trim_missing_y(y: list[str], path: Path) -> slice:
    present = [i for i, v in enumerate(y) if v.strip() != ""]
    if not present:
        raise PanelError(f"{path}: no realized values")
    lo, hi = present[0], present[-1] + 1
    if hi - lo != len(present):
        gap = next(i for i in range(lo, hi) if y[i].strip() == "")
        raise PanelError(f"{path}: missing y at data row {gap + 1} inside the evaluation window")
    return slice(lo, hi)


def read_wide_csv(path: str | Path, horizon: int = 1, series_id: str | None = None) -> ForecastPanel:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PanelError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or header[0] != "t" or header[1] != "y":
        raise PanelError(f"{path}: header must start with 't,y' and name at least one model")
    models = header[2:]
    dupes = sorted({m for m in models if models.count(m) > 1})
    if dupes:
        raise PanelError(f"{path}: duplicate model columns {dupes}")
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(c.strip() == "" for c in row):
            continue
        if len(row) != len(header):
            raise PanelError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        body.append((lineno, row))
    window = _trim_missing_y([r[1] for _, r in body], path)
    body = body[window]
    labels = [r[0].strip() for _, r in body]
    _check_increasing(labels, path)
    y = np.array([_parse_float(r[1], f"{path}:{ln}") for ln, r in body])
    fc = np.full((len(body), len(models)), np.nan)
    avail = np.zeros_like(fc, dtype=bool)
    for i, (lineno, row) in enumerate(body):
        for j, cell in enumerate(row[2:]):
            if cell.strip() != "":
                fc[i, j] = _parse_float(cell, f"{path}:{lineno}")
                avail[i, j] = True
    return ForecastPanel(
        series_id=series_id or path.stem,
        y=y,
        forecasts=fc,
        available=avail,
        model_names=tuple(models),
        horizon=horizon,
        t_labels=tuple(labels),
    )


def write_wide_csv(panel: ForecastPanel, path: str | Path) -> None:
    """Write ``panel`` in the canonical wide format (shortest round-trip floats)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y", *panel.model_names])
        for t in range(panel.T):
            cells = [
                repr(float(panel.forecasts[t, a])) if panel.available[t, a] else ""
                for a in range(panel.n)
            ]
            w.writerow([panel.t_labels[t], repr(float(panel.y[t])), *cells])


def _read_id_rows(path: Path) -> dict[str, list[str]]:
    """Read an M4-style file: optional header, then ``id,v1,v2,...`` rows."""
    out: dict[str, list[str]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            sid = row[0].strip().strip('"')
            values = [c.strip() for c in row[1:]]
            if lineno == 1 and not _looks_numeric(values):
                continue
            if sid in out:
                raise PanelError(f"{path}:{lineno}: duplicate series id {sid!r}")
            out[sid] = values
    return out


def _looks_numeric(values: Iterable[str]) -> bool:
    for v in values:
        if v:
            try:
                float(v)
            except ValueError:
                return False
            return True
    return True


def load_m4_pair(
    actuals: str | Path,
    forecast_files: Sequence[str | Path],
    series_ids: Iterable[str] | None = None,
) -> list[ForecastPanel]:
    """Align an actuals file with per-method forecast files by series id and step.

    Trailing empty actuals are trimmed.  A method with no row for a series, or
    an empty cell, is marked unavailable there.
    """
    actuals = Path(actuals)
    truth = _read_id_rows(actuals)
    if not forecast_files:
        raise PanelError("no forecast files given")
    methods = [Path(p).stem for p in forecast_files]
    dupes = sorted({m for m in methods if methods.count(m) > 1})
    if dupes:
        raise PanelError(f"duplicate method files {dupes}")
    per_method = [_read_id_rows(Path(p)) for p in forecast_files]
    wanted = list(series_ids) if series_ids is not None else list(truth)
    panels = []
    for sid in wanted:
        if sid not in truth:
            raise PanelError(f"{actuals}: series {sid!r} not found")
        raw = truth[sid]
        while raw and raw[-1] == "":
            raw = raw[:-1]
        window = _trim_missing_y(raw, actuals)
        y = np.array([_parse_float(v, f"{actuals} [{sid}]") for v in raw[window]])
        fc = np.full((len(y), len(methods)), np.nan)
        avail = np.zeros_like(fc, dtype=bool)
        for j, table in enumerate(per_method):
            vals = table.get(sid, [])[window]
            for i, cell in enumerate(vals[: len(y)]):
                if cell != "":
                    fc[i, j] = _parse_float(cell, f"{forecast_files[j]} [{sid}]")
                    avail[i, j] = True
        panels.append(
            ForecastPanel(
                series_id=sid,
                y=y,
                forecasts=fc,
                available=avail,
                model_names=tuple(methods),
                horizon=1,
                t_labels=tuple(str(i + 1) for i in range(len(y))),
            )
        )
    return panels


def m4_pair_files(directory: str | Path) -> tuple[Path, list[Path]]:
    directory = Path(directory)
    actuals = directory / "actuals.csv"
    fdir = directory / "forecasts"
    if not actuals.is_file() or not fdir.is_dir():
        raise PanelError(f"{directory}: expected actuals.csv and a forecasts/ directory")
    files = sorted(fdir.glob("*.csv"))
    return actuals, files


def load_panels(path: str | Path, format: str = "wide-csv", horizon: int = 1) -> list[ForecastPanel]:
    """Load every panel under ``path``.

    For ``wide-csv`` ``path`` is a file or a directory of ``*.csv`` files; for
    ``m4-pair`` it is a directory laid out as described in the module docstring.
    """
    path = Path(path)
    if format == "wide-csv":
        if path.is_dir():
            files = sorted(path.glob("*.csv"))
            if not files:
                raise PanelError(f"{path}: no CSV files")
            return [read_wide_csv(f, horizon=horizon) for f in files]
        return [read_wide_csv(path, horizon=horizon)]
    if format == "m4-pair":
        actuals, files = m4_pair_files(path)
        panels = load_m4_pair(actuals, files)
        if horizon != 1:
            panels = [p.replace(horizon=horizon) for p in panels]
        return panels
    raise PanelError(f"unknown format {format!r}")


def load_panel(path: str | Path, format: str = "wide-csv", horizon: int = 1) -> ForecastPanel:
    panels = load_panels(path, format=format, horizon=horizon)
    if len(panels) != 1:
        raise PanelError(f"{path}: holds {len(panels)} series; use load_panels")
    return panels[0]


def read_group_map(path: str | Path) -> dict[str, str]:
    path = Path(path)
    groups: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["model", "group"]:
            raise PanelError(f"{path}: header must be 'model,group'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise PanelError(f"{path}:{lineno}: expected 'model,group'")
            model, group = row[0].strip(), row[1].strip()
            if model in groups:
                raise PanelError(f"{path}:{lineno}: model {model!r} mapped twice")
            groups[model] = group
    if not groups:
        raise PanelError(f"{path}: empty group map")
    return groups
