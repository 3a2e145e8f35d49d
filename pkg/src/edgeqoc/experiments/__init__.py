"""Configured experiments and the ``edgeqoc`` command line."""

from .config import ExperimentConfig, load_config

__all__ = ["ExperimentConfig", "load_config"]
