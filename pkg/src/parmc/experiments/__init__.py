"""Scenario orchestration, fitting and SVG output for the ``parmc`` command."""

from .config import ConfigError, ExperimentConfig, load_config
from .fit import FitResult, fit_linear, fit_loglog
from .scenarios import RUNNERS, Check, ScenarioResult
from .svg import Axes, emit_svg_figure, emit_svg_plot

__all__ = [
    "Axes",
    "Check",
    "ConfigError",
    "ExperimentConfig",
    "FitResult",
    "RUNNERS",
    "ScenarioResult",
    "emit_svg_figure",
    "emit_svg_plot",
    "fit_linear",
    "fit_loglog",
    "load_config",
]
