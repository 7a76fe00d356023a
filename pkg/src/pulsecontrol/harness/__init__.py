"""Experiment configuration, exponent fits, experiment drivers and the CLI."""

from .config import ConfigError, ExperimentConfig, default_config, load, parse, render
from .experiments import EXPERIMENTS, Result
from .fitting import FitError, FitResult, fit_exponent


def run(config: ExperimentConfig, threads: int = 1) -> Result:
    """Run the experiment named by ``config.kind``."""
    return EXPERIMENTS[config.kind](config, threads=threads)


__all__ = ["ConfigError", "EXPERIMENTS", "ExperimentConfig", "FitError", "FitResult", "Result", "default_config",
           "fit_exponent", "load", "parse", "render", "run"]
