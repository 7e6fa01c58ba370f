"""Simulation and analysis of conditionally prepared low-noise twin beams."""

__version__ = "0.1.0"

from .core import (ChannelConfig, ConditionWindow, ConfigError, Moments,
                   PulseRecord, SourceConfig, SubtractionSpec, ValidatedConfig,
                   validate)

__all__ = [
    "ChannelConfig", "ConditionWindow", "ConfigError", "Moments", "PulseRecord",
    "SourceConfig", "SubtractionSpec", "ValidatedConfig", "validate",
]
