"""Scenario definitions: JSON config files and the built-in named scenarios.

A config file is one JSON object::

    {
      "name": "my-run",
      "pulses": 20000,
      "seed": 7,
      "source": {"n_mean_per_mode": 7, "matched_modes": 91, "unmatched_modes": 9},
      "channel": {"tap_ratio": 0.1, "eta_signal": 0.8, "eta_idler": 0.8,
                  "eta_tap": 0.8, "read_noise_sd": 0.0},
      "windows": [{"center_scale": 1.0, "width_sigma": 0.5}],
      "sweep": [1, 2, 3],
      "sweep_modes": [[91, 9], [91, 9], [91, 9]],
      "chunk_size": 10000,
      "bootstrap_resamples": 200,
      "fast_binomial": false
    }

Only ``source`` and ``channel`` are required.  Unknown keys are errors.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from .core import (ChannelConfig, ConditionWindow, ConfigError, SourceConfig,
                   ValidatedConfig, config_digest, validate)


@dataclass(frozen=True)
class Scenario:
    name: str
    source: SourceConfig
    channel: ChannelConfig
    windows: tuple = (ConditionWindow(1.0, 0.5),)
    pulses: int = 20_000
    seed: int = 0
    sweep: Optional[tuple] = None
    sweep_modes: Optional[tuple] = None
    chunk_size: int = 10_000
    bootstrap_resamples: int = 200
    fast_binomial: bool = False

    def config(self, n_mean: Optional[float] = None,
               point: Optional[int] = None) -> ValidatedConfig:
        """Validated configuration, optionally at a sweep value and point index."""
        src = self.source
        if n_mean is not None:
            src = replace(src, n_mean_per_mode=float(n_mean))
        if point is not None and self.sweep_modes is not None:
            m, k = self.sweep_modes[point]
            src = replace(src, matched_modes=int(m), unmatched_modes=int(k))
        return validate(src, self.channel)

    def digest(self) -> str:
        from . import __version__
        return config_digest(
            self.source, self.channel,
            windows=[asdict(w) for w in self.windows], pulses=self.pulses,
            seed=self.seed, sweep=list(self.sweep or ()),
            sweep_modes=[list(x) for x in (self.sweep_modes or ())],
            chunk_size=self.chunk_size, resamples=self.bootstrap_resamples,
            fast_binomial=self.fast_binomial, version=__version__)


def check_scenario(sc: Scenario) -> Scenario:
    """Validate every part of a scenario; collects all problems."""
    problems = []
    try:
        validate(sc.source, sc.channel)
    except ConfigError as exc:
        problems.extend(exc.problems)
    for w in sc.windows:
        if not w.center_scale > 0:
            problems.append("center_scale must be > 0")
        if not w.width_sigma > 0:
            problems.append("width_sigma must be > 0")
    if not isinstance(sc.pulses, int) or sc.pulses < 1:
        problems.append("pulses must be an integer >= 1")
    if sc.chunk_size < 1:
        problems.append("chunk_size must be >= 1")
    if sc.sweep is not None:
        vals = list(sc.sweep)
        if any(v < 0 for v in vals):
            problems.append("sweep values must be >= 0")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            problems.append("sweep values must be strictly increasing")
        if sc.sweep_modes is not None and len(sc.sweep_modes) != len(vals):
            problems.append("sweep_modes must have one [M, K] pair per sweep value")
    elif sc.sweep_modes is not None:
        problems.append("sweep_modes given without sweep")
    if problems:
        raise ConfigError(problems)
    return sc


_TOP = {"name", "pulses", "seed", "source", "channel", "windows", "sweep",
        "sweep_modes", "chunk_size", "bootstrap_resamples", "fast_binomial"}
_SOURCE = {"n_mean_per_mode", "matched_modes", "unmatched_modes"}
_CHANNEL = {"tap_ratio", "eta_signal", "eta_idler", "eta_tap", "read_noise_sd"}
_WINDOW = {"center_scale", "width_sigma"}


def _unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        return [f"{where} must be an object"]
    return [f"unknown key {where}.{k}" if where else f"unknown key {k}"
            for k in sorted(set(obj) - allowed)]


def scenario_from_dict(data: dict) -> Scenario:
    problems = _unknown(data, _TOP, "")
    for key in ("source", "channel"):
        if key not in data:
            problems.append(f"missing required key {key}")
    if problems:
        raise ConfigError(problems)
    problems += _unknown(data["source"], _SOURCE, "source")
    problems += _unknown(data["channel"], _CHANNEL, "channel")
    windows = data.get("windows", [{"center_scale": 1.0, "width_sigma": 0.5}])
    for k, w in enumerate(windows):
        problems += _unknown(w, _WINDOW, f"windows[{k}]")
    if problems:
        raise ConfigError(problems)
    try:
        sc = Scenario(
            name=str(data.get("name", "custom")),
            source=SourceConfig(**data["source"]),
            channel=ChannelConfig(**data["channel"]),
            windows=tuple(ConditionWindow(**w) for w in windows),
            pulses=data.get("pulses", 20_000),
            seed=int(data.get("seed", 0)),
            sweep=tuple(float(v) for v in data["sweep"]) if "sweep" in data else None,
            sweep_modes=(tuple(tuple(int(x) for x in p) for p in data["sweep_modes"])
                         if "sweep_modes" in data else None),
            chunk_size=int(data.get("chunk_size", 10_000)),
            bootstrap_resamples=int(data.get("bootstrap_resamples", 200)),
            fast_binomial=bool(data.get("fast_binomial", False)),
        )
    except TypeError as exc:
        raise ConfigError([f"malformed config: {exc}"]) from exc
    return check_scenario(sc)


def load_scenario(path) -> Scenario:
    """Read a JSON scenario file.

    Raises ``OSError`` for I/O failures and ``ConfigError`` for content errors.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON in {path}: {exc}"]) from exc
    return scenario_from_dict(data)


def _steps(lo, hi, step):
    return tuple(float(v) for v in range(lo, hi + 1, step))


# tap detector efficiency follows the beam detectors unless stated otherwise
BUILTIN = {
    "fig2a": Scenario(
        name="fig2a",
        source=SourceConfig(7.0, 91, 9),
        channel=ChannelConfig(0.1, 0.8, 0.8),
        windows=(ConditionWindow(1.0, 0.5),),
        pulses=20_000, seed=20131,
        sweep=_steps(1, 10, 1),
    ),
    "sweep-large-aperture": Scenario(
        name="sweep-large-aperture",
        source=SourceConfig(50.0, 950, 50),
        channel=ChannelConfig(0.12, 0.63 / 0.88, 0.63 / 0.88),
        windows=(ConditionWindow(1.0, 1 / 15), ConditionWindow(0.93, 1 / 15)),
        pulses=20_000, seed=20132,
        sweep=_steps(50, 400, 50),
    ),
    "sweep-small-aperture": Scenario(
        name="sweep-small-aperture",
        source=SourceConfig(50.0, 130, 20),
        channel=ChannelConfig(0.12, 0.53 / 0.88, 0.53 / 0.88),
        windows=(ConditionWindow(1.0, 1 / 15), ConditionWindow(0.93, 1 / 15)),
        pulses=20_000, seed=20133,
        sweep=_steps(50, 400, 50),
    ),
    "fano-sweep": Scenario(
        name="fano-sweep",
        source=SourceConfig(50.0, 100, 0),
        channel=ChannelConfig(0.1, 0.7, 0.7),
        windows=(ConditionWindow(1.0, 1 / 15),),
        pulses=50_000, seed=20134,
        sweep=_steps(50, 400, 50),
    ),
    "oracle-small": Scenario(
        name="oracle-small",
        source=SourceConfig(0.8, 2, 1),
        channel=ChannelConfig(0.2, 0.7, 0.7, eta_tap=1.0),
        windows=(ConditionWindow(1.0, 0.5),),
        pulses=100_000, seed=20135,
    ),
}


def builtin(name: str) -> Scenario:
    try:
        return BUILTIN[name]
    except KeyError:
        raise ConfigError([f"unknown scenario {name!r}; choose from "
                           + ", ".join(sorted(BUILTIN))]) from None
