"""Experiment harness: configs, presets, runner, comparison and CLI."""

from .config import ConfigError, ExperimentConfig, build_config
from .presets import preset
from .runner import ResultRow, read_results, run

__all__ = ["ConfigError", "ExperimentConfig", "build_config", "preset", "ResultRow",
           "read_results", "run"]
