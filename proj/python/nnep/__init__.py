"""Expectation propagation for two-layer neural network regression."""

from ._core import (
    ConfigError,
    DataError,
    Diverged,
    Model,
    NnepError,
    fit,
    g,
    mean_g,
    preset_config,
    synth,
    var_g,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Diverged",
    "Model",
    "NnepError",
    "fit",
    "g",
    "mean_g",
    "preset_config",
    "synth",
    "var_g",
]
