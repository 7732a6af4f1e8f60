"""Forecast combination by similarity-matched tabular Q-learning."""

from rlcombo.agent import AgentConfig, QTable, RunResult, run
from rlcombo.panel import ForecastPanel, append_benchmark_average, group_mean_panel, load_panel

__all__ = [
    "AgentConfig",
    "ForecastPanel",
    "QTable",
    "RunResult",
    "append_benchmark_average",
    "group_mean_panel",
    "load_panel",
    "run",
]

__version__ = "0.1.0"
