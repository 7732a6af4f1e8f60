"""Similarity-matched tabular Q-learning over forecasting models.

At every forecast origin ``t`` the agent embeds the error profile observed so
far, looks up the most similar frozen past state, copies that state's Q-row
and picks the model with the highest Q-value.  When nothing in the history is
similar enough it falls back to the equal-weight average.  Once the target
realizes, the new row moves toward the observed rewards of *every* model::

    q[a] <- q[a] + alpha * (g[a] - q[a]),   g[a] = -(y - yhat[a]) ** 2

Indexing: origins are 1-based and match feature columns, so origin ``t``
sees periods ``1..t`` and forecasts period ``t + h``.  Unobserved Q-values
are NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rlcombo.embedding import (
    StateEmbedding,
    build_features,
    cumulative_squared_errors,
    embed,
    fit_pca,
)
from rlcombo.panel import SIMPLE_AVERAGE, ForecastPanel, available_mean

UNOBSERVED = np.nan
NORM_FLOOR = 1e-12


class NoCandidate(LookupError):
    """No available action has an observed Q-value; the caller falls back."""


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 0.1
    eta: float = 0.95
    gamma: float = 0.0  # kept for reference; the applied update has no bootstrap term
    k_max: int = 3
    var_target: float = 0.9
    warmup: int | None = None
    horizon: int = 1
    fallback: str = "simple_average"
    fallback_model: str | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if math.isnan(self.eta) or self.eta < -1:
            raise ValueError(f"eta must be >= -1, got {self.eta}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.k_max < 1:
            raise ValueError("k_max must be positive")
        if not 0 < self.var_target <= 1:
            raise ValueError("var_target must be in (0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.fallback not in ("simple_average", "named_model"):
            raise ValueError(f"unknown fallback {self.fallback!r}")
        if self.fallback == "named_model" and not self.fallback_model:
            raise ValueError("fallback=named_model needs fallback_model")
        if self.warmup is None:
            object.__setattr__(self, "warmup", max(self.k_max + 2, 5))
        if self.warmup < 3:
            raise ValueError(f"warmup must be >= 3, got {self.warmup}")


@dataclass
class QRow:
    t: int
    embedding: StateEmbedding | None
    q: np.ndarray
    action: int | None = None
    matched_t0: int | None = None
    similarity: float | None = None


@dataclass
class QTable:
    """Append-only store of per-origin Q-rows.

    Embeddings are mirrored into a zero-padded matrix so similarity search
    over the whole history is a handful of array operations.
    """

    n_actions: int
    rows: list[QRow] = field(default_factory=list)
    _index: dict[int, int] = field(default_factory=dict, repr=False)
    _emb: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)), repr=False)
    _k: list[int] = field(default_factory=list, repr=False)
    _emb_t: list[int] = field(default_factory=list, repr=False)

    def append(self, row: QRow) -> None:
        if row.t in self._index:
            raise ValueError(f"Q-table already has a row for t={row.t}")
        if row.q.shape != (self.n_actions,):
            raise ValueError(f"q has shape {row.q.shape}, expected ({self.n_actions},)")
        if self.rows and row.t <= self.rows[-1].t:
            raise ValueError("rows must be appended in increasing t")
        self._index[row.t] = len(self.rows)
        self.rows.append(row)
        if row.embedding is not None:
            self._cache(row.t, row.embedding.scores)

    def _cache(self, t: int, scores: np.ndarray) -> None:
        n, width = self._emb.shape
        if n == len(self._k) or scores.size > width:
            grown = np.zeros((max(8, 2 * n), max(width, scores.size)))
            grown[:n, :width] = self._emb
            self._emb = grown
        self._emb[len(self._k), : scores.size] = scores
        self._k.append(scores.size)
        self._emb_t.append(t)

    def embeddings(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(origins, dimensions, zero-padded score matrix) of stored embeddings."""
        m = len(self._k)
        return np.array(self._emb_t, dtype=int), np.array(self._k, dtype=int), self._emb[:m]

    def __getitem__(self, t: int) -> QRow:
        try:
            return self.rows[self._index[t]]
        except KeyError:
            raise KeyError(f"no Q-table row for t={t}") from None

    def __contains__(self, t: int) -> bool:
        return t in self._index

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class Decision:
    """What happened for one forecast target (one per panel row)."""

    target: int  # 1-based panel row being forecast
    origin: int | None
    similarity: float | None
    matched_t0: int | None
    action: int | None
    used_fallback: bool
    forecast: float


@dataclass
class RunResult:
    forecasts: np.ndarray
    qtable: QTable
    decisions: list[Decision]
    config: AgentConfig

    def selected(self) -> np.ndarray:
        """Chosen action per target, -1 where the fallback was used."""
        return np.array([-1 if d.action is None else d.action for d in self.decisions])


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < NORM_FLOOR or nb < NORM_FLOOR:
        return 0.0
    sim = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, sim))


def most_similar(
    current: StateEmbedding,
    history: QTable | list[QRow],
    latest: int | None = None,
) -> tuple[int, float] | None:
    """Best cosine match among stored embeddings; later rows win ties.

    Embeddings from refits of different dimension are compared on their
    common leading components.  ``latest`` restricts the search to origins
    up to that index.
    """
    if not isinstance(history, QTable):
        table = QTable(0)
        for row in history:
            if row.embedding is not None:
                table._cache(row.t, row.embedding.scores)
        history = table
    origins, dims, emb = history.embeddings()
    keep = origins != current.t
    if latest is not None:
        keep &= origins <= latest
    origins, dims, emb = origins[keep], dims[keep], emb[keep]
    if origins.size == 0:
        return None
    cur = np.zeros(emb.shape[1])
    width = min(cur.size, current.scores.size)
    cur[:width] = current.scores[:width]
    common = np.minimum(dims, current.scores.size)
    mask = np.arange(emb.shape[1])[None, :] < common[:, None]
    a = np.where(mask, emb, 0.0)
    b = np.where(mask, cur[None, :], 0.0)
    na = np.sqrt(np.sum(a * a, axis=1))
    nb = np.sqrt(np.sum(b * b, axis=1))
    live = (na >= NORM_FLOOR) & (nb >= NORM_FLOOR)
    sims = np.zeros(origins.size)
    sims[live] = np.sum(a * b, axis=1)[live] / (na[live] * nb[live])
    sims = np.clip(sims, -1.0, 1.0)
    best = origins.size - 1 - int(np.argmax(sims[::-1]))
    return int(origins[best]), float(sims[best])


def accepts(similarity: float, eta: float) -> bool:
    """Similarity must exceed ``eta``; ``eta <= -1`` accepts every match."""
    return eta <= -1.0 or similarity > eta


def select_action(q: np.ndarray, available: np.ndarray) -> int:
    """Argmax over observed, available Q-values; lowest index on ties."""
    q = np.asarray(q, dtype=float)
    ok = np.asarray(available, dtype=bool) & ~np.isnan(q)
    if not ok.any():
        raise NoCandidate("no observed Q-value among available actions")
    masked = np.where(ok, q, -np.inf)
    return int(np.argmax(masked))


def fallback_forecast(panel: ForecastPanel, t: int, cfg: AgentConfig) -> float:
    """Benchmark forecast for panel row ``t`` (1-based).

    ``named_model`` passes that model through when it is available.  The
    equal-weight average reuses a ``simple_average`` column when the panel
    carries one, so the two always agree exactly.
    """
    row = t - 1
    names = panel.model_names
    if cfg.fallback == "named_model" and cfg.fallback_model in names:
        a = names.index(cfg.fallback_model)
        if panel.available[row, a]:
            return float(panel.forecasts[row, a])
    if SIMPLE_AVERAGE in names:
        a = names.index(SIMPLE_AVERAGE)
        if panel.available[row, a]:
            return float(panel.forecasts[row, a])
        mask = panel.available[row].copy()
        mask[a] = False
        return available_mean(panel.forecasts[row], mask)
    return available_mean(panel.forecasts[row], panel.available[row])


def reward(panel: ForecastPanel, target: int) -> np.ndarray:
    """Negative squared error of every model at panel row ``target``; NaN if missing."""
    row = target - 1
    g = -((panel.y[row] - panel.forecasts[row]) ** 2)
    return np.where(panel.available[row], g, UNOBSERVED)


def td_update(q_row: np.ndarray, g: np.ndarray, alpha: float) -> np.ndarray:
    """One temporal-difference step toward observed rewards.

    Never-updated entries take the reward outright; unobserved rewards leave
    the entry alone.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    q = np.asarray(q_row, dtype=float)
    g = np.asarray(g, dtype=float)
    seen = ~np.isnan(g)
    out = q.copy()
    if alpha == 1.0:
        out[seen] = g[seen]
        return out
    fresh = seen & np.isnan(q)
    step = seen & ~fresh
    out[step] = q[step] + alpha * (g[step] - q[step])
    out[fresh] = g[fresh]
    return out


def observe(qtable: QTable, t: int, g: np.ndarray, alpha: float) -> QTable:
    """Apply the TD update to row ``t`` only; the row it was copied from is untouched."""
    row = qtable[t]
    row.q = td_update(row.q, g, alpha)
    return qtable


# ---------------------------------------------------------------------------
# policy loop
# ---------------------------------------------------------------------------


def _state(panel: ForecastPanel, t: int, cfg: AgentConfig, cumulative: np.ndarray) -> StateEmbedding:
    feats = build_features(panel, t, cumulative)
    model = fit_pca(feats, cfg.k_max, cfg.var_target)
    return embed(model, feats, t)


def step(
    panel: ForecastPanel,
    t: int,
    qtable: QTable,
    cfg: AgentConfig,
    cumulative: np.ndarray | None = None,
) -> tuple[float, Decision]:
    """Decide the forecast of period ``t + h`` at origin ``t`` and log a Q-row."""
    if t <= cfg.warmup:
        raise ValueError(f"step needs t > warmup ({cfg.warmup}), got {t}")
    if cumulative is None:
        cumulative = cumulative_squared_errors(panel)
    target = t + cfg.horizon
    state = _state(panel, t, cfg, cumulative)
    # only rows whose own reward has realized carry usable Q-values
    match = most_similar(state, qtable, latest=t - cfg.horizon)
    forecast = None
    action = None
    if match is not None and accepts(match[1], cfg.eta):
        t0, sim = match
        q = qtable[t0].q.copy()
        try:
            action = select_action(q, panel.available[target - 1])
            forecast = float(panel.forecasts[target - 1, action])
        except NoCandidate:
            pass
    else:
        q = np.full(panel.n, UNOBSERVED)
    if forecast is None:
        forecast = fallback_forecast(panel, target, cfg)
    qtable.append(
        QRow(
            t=t,
            embedding=state,
            q=q,
            action=action,
            matched_t0=match[0] if match else None,
            similarity=match[1] if match else None,
        )
    )
    decision = Decision(
        target=target,
        origin=t,
        similarity=match[1] if match else None,
        matched_t0=match[0] if match else None,
        action=action,
        used_fallback=action is None,
        forecast=forecast,
    )
    return forecast, decision


def run(panel: ForecastPanel, cfg: AgentConfig | None = None) -> RunResult:
    """Run the agent over a whole panel, one forecast per row.

    Rows with no usable origin, or whose origin is inside the warm-up, get the
    fallback forecast.  Warm-up origins from 2 on still store their embedding
    and learn from their rewards so that later steps have a history to match.
    """
    cfg = cfg or AgentConfig(horizon=panel.horizon)
    h = cfg.horizon
    if panel.T <= cfg.warmup + h:
        raise ValueError(f"panel {panel.series_id!r} too short: T={panel.T}, need > {cfg.warmup + h}")
    cumulative = cumulative_squared_errors(panel)
    qtable = QTable(panel.n)
    forecasts = np.empty(panel.T)
    decisions: list[Decision] = []

    for target in range(1, h + 1):
        fc = fallback_forecast(panel, target, cfg)
        forecasts[target - 1] = fc
        decisions.append(Decision(target, None, None, None, None, True, fc))

    for t in range(1, panel.T - h + 1):
        # rewards realized by period t belong to origin t - h
        done = t - h
        if done in qtable:
            observe(qtable, done, reward(panel, done + h), cfg.alpha)
        target = t + h
        if t > cfg.warmup:
            fc, dec = step(panel, t, qtable, cfg, cumulative)
        else:
            if t >= 2:
                qtable.append(QRow(t=t, embedding=_state(panel, t, cfg, cumulative), q=np.full(panel.n, UNOBSERVED)))
            fc = fallback_forecast(panel, target, cfg)
            dec = Decision(target, t, None, None, None, True, fc)
        forecasts[target - 1] = fc
        decisions.append(dec)

    # origins whose targets realize after the last decision
    for t in range(max(1, panel.T - 2 * h + 1), panel.T - h + 1):
        if t in qtable:
            observe(qtable, t, reward(panel, t + h), cfg.alpha)

    return RunResult(forecasts=forecasts, qtable=qtable, decisions=decisions, config=cfg)
