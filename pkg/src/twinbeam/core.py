"""Domain types, configuration validation and seeding helpers.

Every other module consumes a :class:`ValidatedConfig`; nothing downstream
re-checks ranges.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants.

    ``problems`` lists every violation found, not just the first.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class GuardError(RuntimeError):
    """An instance is too large for exact enumeration."""


class ConditioningError(ValueError):
    """A condition window cannot be applied (e.g. zero tap spread)."""


@dataclass(frozen=True)
class SourceConfig:
    n_mean_per_mode: float
    matched_modes: int
    unmatched_modes: int = 0

    @property
    def total_modes(self) -> int:
        return self.matched_modes + self.unmatched_modes


@dataclass(frozen=True)
class ChannelConfig:
    tap_ratio: float
    eta_signal: float
    eta_idler: float
    eta_tap: Optional[float] = None
    read_noise_sd: float = 0.0

    @property
    def effective_eta_signal(self) -> float:
        """Through-path efficiency of the signal beam, (1 - r) * eta_s."""
        return (1.0 - self.tap_ratio) * self.eta_signal

    @property
    def effective_eta_idler(self) -> float:
        return (1.0 - self.tap_ratio) * self.eta_idler


@dataclass(frozen=True)
class PulseRecord:
    d_s: int
    d_i: int
    n_c: int


@dataclass(frozen=True)
class ConditionWindow:
    """Acceptance window on the tap count.

    Retains pulses with ``|n_c - center_scale * <n_c>| <= width_sigma * sd / 2``.
    ``width_sigma`` is the FULL width in units of the tap standard deviation.
    """

    center_scale: float = 1.0
    width_sigma: float = 0.5

    def bounds(self, mean_tap: float, sd_tap: float) -> tuple[float, float]:
        center = self.center_scale * mean_tap
        if math.isinf(self.width_sigma):
            return -math.inf, math.inf
        half = 0.5 * self.width_sigma * sd_tap
        return center - half, center + half


@dataclass(frozen=True)
class SubtractionSpec:
    photons_subtracted: int

    def __post_init__(self):
        if self.photons_subtracted < 0:
            raise ConfigError(["photons_subtracted must be >= 0"])


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float

    @property
    def mdr(self) -> float:
        if self.variance <= 0:
            return math.nan
        return self.mean / math.sqrt(self.variance)


@dataclass(frozen=True)
class ValidatedConfig:
    source: SourceConfig
    channel: ChannelConfig
    window: Optional[ConditionWindow] = None
    lam: float = field(default=0.0)

    def digest(self) -> str:
        return config_digest(self.source, self.channel)


def thermal_lambda(n_mean: float) -> float:
    """Geometric parameter N_m / (N_m + 1) of a thermal mode."""
    return n_mean / (n_mean + 1.0)


def _in_unit(x) -> bool:
    return x is not None and 0.0 <= x <= 1.0


def validate(source: SourceConfig, channel: ChannelConfig,
             window: Optional[ConditionWindow] = None) -> ValidatedConfig:
    """Check every invariant and return a normalized configuration.

    The tap efficiency defaults to the signal-beam efficiency when unset.

    Raises
    ------
    ConfigError
        Listing all violated invariants.
    """
    problems = []
    n_m = source.n_mean_per_mode
    if not (isinstance(n_m, (int, float)) and math.isfinite(n_m)) or n_m < 0:
        problems.append("n_mean_per_mode must be a finite number >= 0")
    for name in ("matched_modes", "unmatched_modes"):
        v = getattr(source, name)
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 0:
            problems.append(f"{name} must be an integer >= 0")
    if not problems and source.matched_modes + source.unmatched_modes < 1:
        problems.append("total mode count (matched + unmatched) must be >= 1")

    for name in ("tap_ratio", "eta_signal", "eta_idler"):
        if not _in_unit(getattr(channel, name)):
            problems.append(f"{name} out of [0,1]")
    if channel.eta_tap is not None and not _in_unit(channel.eta_tap):
        problems.append("eta_tap out of [0,1]")
    sd = channel.read_noise_sd
    if sd is None or not math.isfinite(sd) or sd < 0:
        problems.append("read_noise_sd must be a finite number >= 0")

    if window is not None:
        if not window.center_scale > 0:
            problems.append("center_scale must be > 0")
        if not window.width_sigma > 0:
            problems.append("width_sigma must be > 0")

    if problems:
        raise ConfigError(problems)

    source = SourceConfig(float(n_m), int(source.matched_modes),
                          int(source.unmatched_modes))
    eta_tap = channel.eta_signal if channel.eta_tap is None else channel.eta_tap
    channel = ChannelConfig(float(channel.tap_ratio), float(channel.eta_signal),
                            float(channel.eta_idler), float(eta_tap),
                            float(channel.read_noise_sd))
    return ValidatedConfig(source, channel, window, thermal_lambda(source.n_mean_per_mode))


def config_digest(source: SourceConfig, channel: ChannelConfig, **extra) -> str:
    payload = {"source": asdict(source), "channel": asdict(channel)}
    payload.update(extra)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for chunk ``index`` of a run seeded with ``seed``.

    Streams depend only on (seed, index), so any execution order of the
    chunks reproduces the same draws.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))
