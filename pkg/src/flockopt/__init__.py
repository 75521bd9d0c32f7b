"""Flocking-based asynchronous distributed stochastic optimization."""
__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, config_parse, preset  # noqa: E402
from .engine import Trace, run  # noqa: E402
