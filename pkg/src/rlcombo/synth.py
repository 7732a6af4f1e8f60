"""Regime-switching synthetic panels with known best models.

Each model's forecast is the truth plus Gaussian noise whose standard
deviation depends on the active regime, so the best model in every regime is
known by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from rlcombo.config import parse_key_values
from rlcombo.panel import ForecastPanel

BASES = ("constant", "random_walk")


@dataclass(frozen=True)
class Regime:
    length: int
    stds: tuple[float, ...]


@dataclass(frozen=True)
class RegimeSpec:
    n_models: int
    regimes: tuple[Regime, ...]
    seed: int = 0
    base: str = "random_walk"
    level: float = 100.0
    step_std: float = 1.0

    def __post_init__(self):
        if self.n_models < 1:
            raise ValueError("n_models must be positive")
        if not self.regimes:
            raise ValueError("at least one regime is required")
        for i, r in enumerate(self.regimes):
            if r.length < 1:
                raise ValueError(f"regime {i}: length must be positive")
            if len(r.stds) != self.n_models:
                raise ValueError(f"regime {i}: {len(r.stds)} stds for {self.n_models} models")
            if any(s < 0 for s in r.stds):
                raise ValueError(f"regime {i}: stds must be nonnegative")
        if self.base not in BASES:
            raise ValueError(f"base must be one of {BASES}")

    @property
    def T(self) -> int:
        return sum(r.length for r in self.regimes)

    def with_seed(self, seed: int) -> RegimeSpec:
        return replace(self, seed=seed)

    def regime_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.regimes)), [r.length for r in self.regimes])

    def best_models(self) -> list[int]:
        return [int(np.argmin(r.stds)) for r in self.regimes]


def generate(spec: RegimeSpec) -> ForecastPanel:
    rng = np.random.default_rng(spec.seed)
    T = spec.T
    if spec.base == "constant":
        y = np.full(T, spec.level)
    else:
        y = spec.level + np.cumsum(rng.normal(0.0, spec.step_std, T))
    stds = np.vstack([np.tile(r.stds, (r.length, 1)) for r in spec.regimes])
    forecasts = y[:, None] + stds * rng.standard_normal((T, spec.n_models))
    return ForecastPanel(
        series_id=f"synth_{spec.seed}",
        y=y,
        forecasts=forecasts,
        available=np.ones((T, spec.n_models), dtype=bool),
        model_names=tuple(f"m{a + 1}" for a in range(spec.n_models)),
    )


def two_regime_swap(length: int = 150, low: float = 0.5, high: float = 1.5, seed: int = 0) -> RegimeSpec:
    """Two models whose noise levels swap halfway through."""
    return RegimeSpec(
        n_models=2,
        regimes=(Regime(length, (low, high)), Regime(length, (high, low))),
        seed=seed,
    )


def dominant_model(n_models: int = 4, T: int = 300, noisy: float = 1.0, seed: int = 0) -> RegimeSpec:
    """One regime where the first model is exact and the rest are noisy."""
    stds = (0.0,) + (noisy,) * (n_models - 1)
    return RegimeSpec(n_models=n_models, regimes=(Regime(T, stds),), seed=seed)


def parse_spec(text: str) -> RegimeSpec:
    """Parse a ``key = value`` spec.

    ``regime`` may repeat, one line per regime in order, written as
    ``<length> : <std1>, <std2>, ...``.
    """
    pairs = parse_key_values(text, repeatable=("regime",))
    known = {"n_models", "regime", "seed", "base", "level", "step_std"}
    extra = set(pairs) - known
    if extra:
        raise ValueError(f"unknown spec keys {sorted(extra)}")
    regimes = []
    for raw in pairs.get("regime", []):
        length, sep, stds = raw.partition(":")
        if not sep:
            raise ValueError(f"regime {raw!r}: expected '<length> : <stds>'")
        regimes.append(Regime(int(length), tuple(float(s) for s in stds.split(","))))
    if "n_models" in pairs:
        n_models = int(pairs["n_models"])
    elif regimes:
        n_models = len(regimes[0].stds)
    else:
        raise ValueError("spec defines no regimes")
    return RegimeSpec(
        n_models=n_models,
        regimes=tuple(regimes),
        seed=int(pairs.get("seed", 0)),
        base=pairs.get("base", "random_walk"),
        level=float(pairs.get("level", 100.0)),
        step_std=float(pairs.get("step_std", 1.0)),
    )


def read_spec(path: str | Path) -> RegimeSpec:
    return parse_spec(Path(path).read_text(encoding="utf-8"))


def format_spec(spec: RegimeSpec) -> str:
    lines = [
        f"n_models = {spec.n_models}",
        f"seed = {spec.seed}",
        f"base = {spec.base}",
        f"level = {spec.level!r}",
        f"step_std = {spec.step_std!r}",
    ]
    for r in spec.regimes:
        lines.append(f"regime = {r.length} : " + ", ".join(repr(float(s)) for s in r.stds))
    return "\n".join(lines) + "\n"
