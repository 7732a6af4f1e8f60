"""State embedding: per-model error features compressed by PCA.

Features are laid out ``p x t`` (one row per feature, one column per period).
PCA treats each column as an observation, so loadings live in feature space
and the state at period ``t`` is the projection of the standardized column
``t`` onto the leading components.

The PCA is refit every period on columns ``1..t``.  Loadings are sign-fixed
(largest absolute loading positive, lowest index on ties) so that embeddings
produced by different refits remain comparable by cosine similarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rlcombo.panel import ForecastPanel

STD_FLOOR = 1e-12
EIG_FLOOR = 1e-12


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # p x t
    feature_names: tuple[str, ...]

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def t(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PCAModel:
    means: np.ndarray
    scales: np.ndarray
    components: np.ndarray  # k x p, orthonormal rows
    explained_variance: np.ndarray
    total_variance: float

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def explained_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros(self.k)
        return self.explained_variance / self.total_variance


@dataclass(frozen=True)
class StateEmbedding:
    t: int
    scores: np.ndarray

    def __post_init__(self):
        s = np.array(self.scores, dtype=float)
        if not np.all(np.isfinite(s)):
            raise ValueError(f"non-finite embedding at t={self.t}")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)


def cumulative_squared_errors(panel: ForecastPanel) -> np.ndarray:
    """``T x n`` running sums of squared errors; missing forecasts add nothing."""
    err = np.where(panel.available, panel.forecasts - panel.y[:, None], 0.0)
    return np.cumsum(err**2, axis=0)


def build_features(panel: ForecastPanel, upto: int, cumulative: np.ndarray | None = None) -> FeatureMatrix:
    """Cumulative squared errors per model over periods ``1..upto`` (1-based).

    ``cumulative`` may pass a precomputed :func:`cumulative_squared_errors`
    result; the returned matrix is a column prefix of it either way.
    """
    if not 1 <= upto <= panel.T:
        raise IndexError(f"upto={upto} outside 1..{panel.T}")
    if cumulative is None:
        cumulative = cumulative_squared_errors(panel)
    return FeatureMatrix(cumulative[:upto].T.copy(), panel.model_names)


def _row_stats(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = values.mean(axis=1)
    stds = values.std(axis=1)
    return means, stds


def _apply_scaling(values: np.ndarray, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values, dtype=float)
    live = stds >= STD_FLOOR
    out[live] = (values[live] - means[live, None]) / stds[live, None]
    return out


def standardize(features: FeatureMatrix) -> FeatureMatrix:
    """Z-score each row with its population mean and std; flat rows become 0."""
    if features.t < 2:
        raise InsufficientHistory("standardizing needs at least two periods")
    means, stds = _row_stats(features.values)
    return FeatureMatrix(_apply_scaling(features.values, means, stds), features.feature_names)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # rows are components; flip so the largest |loading| is positive
    out = vectors.copy()
    for i, row in enumerate(out):
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            out[i] = -row
    return out


def fit_pca(features: FeatureMatrix, k_max: int = 3, var_target: float = 0.9) -> PCAModel:
    """Fit PCA on the columns of a feature matrix.

    ``features`` should be raw (unstandardized); the stored means and scales
    are what :func:`embed` uses to standardize a column before projecting.
    Passing an already standardized matrix is harmless since z-scoring is
    idempotent.

    The retained dimension is the smallest ``k`` reaching ``var_target`` of
    the total variance, capped at ``k_max`` and at the numerical rank.
    """
    if k_max < 1:
        raise ValueError("k_max must be positive")
    if not 0 < var_target <= 1:
        raise ValueError("var_target must be in (0, 1]")
    if features.t < 2:
        raise InsufficientHistory(f"PCA needs t >= 2, got t={features.t}")
    means, stds = _row_stats(features.values)
    scales = np.where(stds >= STD_FLOOR, stds, 0.0)
    z = _apply_scaling(features.values, means, stds)
    cov = (z @ z.T) / z.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = float(np.trace(cov))
    rank = int(np.sum(evals > EIG_FLOOR))
    if rank == 0:
        k = 0
    else:
        ratios = np.cumsum(evals[:rank]) / total
        k_var = int(np.searchsorted(ratios, var_target - 1e-12) + 1)
        k = min(k_max, k_var, rank)
    comps = _fix_signs(evecs[:, :k].T) if k else np.zeros((0, features.p))
    return PCAModel(
        means=means,
        scales=scales,
        components=comps,
        explained_variance=evals[:k].copy(),
        total_variance=total,
    )


def embed(model: PCAModel, features: FeatureMatrix, t: int) -> StateEmbedding:
    """Project column ``t`` (1-based) onto the model's components."""
    if features.p != model.means.shape[0]:
        raise ValueError(f"feature dimension {features.p} != fitted dimension {model.means.shape[0]}")
    if not 1 <= t <= features.t:
        raise IndexError(f"column {t} outside 1..{features.t}")
    col = features.values[:, t - 1]
    z = np.zeros_like(col, dtype=float)
    live = model.scales > 0
    z[live] = (col[live] - model.means[live]) / model.scales[live]
    return StateEmbedding(t=t, scores=model.components @ z)


def reconstruct(model: PCAModel, scores: np.ndarray) -> np.ndarray:
    """Map scores back to standardized feature space."""
    return model.components.T @ np.asarray(scores, dtype=float)
