"""Drivers behind the CLI: single-point simulation, N_m sweeps, oracle checks."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .analytic import fano_expected, fano_multimode, nrf_expected
from .core import ConditioningError, ConditionWindow, ValidatedConfig
from .estimators import (Estimate, FitError, STAT_NAMES, ensemble_statistics,
                         linear_fit, stat_rows, write_stats_csv, fmt)
from .montecarlo import Ensemble, apply_condition, run_ensemble, tap_statistics
from .oracle import check_guard, exact_conditional_stats, exact_pipeline
from .scenarios import Scenario


@dataclass
class WindowResult:
    window: ConditionWindow
    ensemble: Optional[Ensemble]
    stats: dict
    acceptance: float
    note: str = ""

    @property
    def empty(self) -> bool:
        return self.ensemble is None or self.ensemble.pulse_count < 2


@dataclass
class PointResult:
    n_mean: float
    seed: int
    config: ValidatedConfig
    ensemble: Ensemble
    stats: dict
    windows: list = field(default_factory=list)

    def rows(self) -> list:
        ch, src = self.config.channel, self.config.source
        eta = 0.5 * (ch.effective_eta_signal + ch.effective_eta_idler)
        extra = {
            "pulses": self.ensemble.pulse_count,
            "nrf_expected": nrf_expected(src.matched_modes, src.unmatched_modes,
                                         eta, self.n_mean),
            "fano_expected": fano_expected(self.n_mean, eta),
            "fano_multimode": fano_multimode(src.matched_modes, src.unmatched_modes,
                                             eta, self.n_mean),
        }
        out = stat_rows(self.n_mean, self.stats, self.seed, None, extra)
        for wr in self.windows:
            extra = {"acceptance": wr.acceptance,
                     "pulses": 0 if wr.ensemble is None else wr.ensemble.pulse_count}
            out += stat_rows(self.n_mean, wr.stats, self.seed, wr.window, extra)
        return out


def _nan_stats():
    return {k: Estimate(math.nan, math.nan) for k in STAT_NAMES}


def simulate_point(cfg: ValidatedConfig, windows, seed: int, pulses: int,
                   chunk_size: int = 10_000, threads: int = 1,
                   resamples: int = 200, fast_binomial: bool = False) -> PointResult:
    """Simulate one configuration and condition it on every window.

    Windows that cannot be applied (zero tap spread) or accept fewer than
    two pulses are kept with ``nan`` statistics and a note.
    """
    ens = run_ensemble(cfg, seed, pulses, chunk_size, threads, fast_binomial)
    stats = ensemble_statistics(ens, resamples, seed)
    result = PointResult(cfg.source.n_mean_per_mode, seed, cfg, ens, stats)
    tap = tap_statistics(ens) if ens.pulse_count >= 2 else None
    for w in windows:
        if tap is None:
            result.windows.append(WindowResult(w, None, _nan_stats(), math.nan,
                                               "too few pulses"))
            continue
        try:
            cond = apply_condition(ens, w, tap)
        except ConditioningError as exc:
            result.windows.append(WindowResult(w, None, _nan_stats(), 0.0, str(exc)))
            continue
        note = "" if cond.pulse_count >= 2 else "window accepted fewer than 2 pulses"
        cstats = ensemble_statistics(cond, resamples, seed) if not note else _nan_stats()
        result.windows.append(WindowResult(w, cond, cstats, cond.acceptance, note))
    return result


def _manifest(scenario: Scenario, command: str, **extra) -> dict:
    data = {
        "command": command,
        "scenario": scenario.name,
        "seed": scenario.seed,
        "pulses": scenario.pulses,
        "config_digest": scenario.digest(),
        "version": __version__,
    }
    data.update(extra)
    return data


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def run_simulate(scenario: Scenario, out: Optional[Path] = None,
                 threads: int = 1) -> PointResult:
    """Single-point run; writes samples.csv, stats.csv and manifest.json."""
    cfg = scenario.config()
    res = simulate_point(cfg, scenario.windows, scenario.seed, scenario.pulses,
                         scenario.chunk_size, threads, scenario.bootstrap_resamples,
                         scenario.fast_binomial)
    if out is not None:
        out = Path(out)
        digest = scenario.digest()
        _write(out / "samples.csv", res.ensemble.to_csv())
        _write(out / "stats.csv", write_stats_csv(res.rows(), digest=digest))
        notes = {f"window_{k}": wr.note for k, wr in enumerate(res.windows) if wr.note}
        _write(out / "manifest.json", json.dumps(
            _manifest(scenario, "simulate", notes=notes), indent=2, sort_keys=True) + "\n")
    return res


@dataclass
class SweepResult:
    scenario: Scenario
    points: list

    def series(self, stat: str, window: Optional[int] = None):
        """(N_m, Estimate) pairs for one statistic, unconditioned or per window."""
        out = []
        for p in self.points:
            st = p.stats if window is None else p.windows[window].stats
            out.append((p.n_mean, st[stat]))
        return out

    def fit(self, stat: str, window: Optional[int] = None):
        pts = [(x, e.value) for x, e in self.series(stat, window) if math.isfinite(e.value)]
        return linear_fit([x for x, _ in pts], [y for _, y in pts])

    def fit_rows(self) -> list:
        rows = []
        keys = [(None, None)] + [(k, w) for k, w in enumerate(self.scenario.windows)]
        for stat in ("fano", "nrf", "mdr_s", "mdr_i"):
            for k, w in keys:
                try:
                    f = self.fit(stat, k)
                    vals = [f.slope, f.slope_stderr, f.intercept, f.intercept_stderr,
                            f.residual_rms]
                except FitError:
                    vals = [math.nan] * 5
                rows.append([stat, fmt(k is not None),
                             fmt(w.center_scale if w else math.nan),
                             fmt(w.width_sigma if w else math.nan)] + [fmt(v) for v in vals])
        return rows


FIT_HEADER = ["stat", "conditioned", "window_c", "window_w", "slope", "slope_stderr",
              "intercept", "intercept_stderr", "residual_rms"]


def run_sweep(scenario: Scenario, out: Optional[Path] = None,
              threads: int = 1) -> SweepResult:
    """Statistics versus N_m; point k uses seed ``scenario.seed + k``."""
    if not scenario.sweep:
        raise ValueError("scenario has no sweep values")
    points = []
    for k, n_mean in enumerate(scenario.sweep):
        cfg = scenario.config(n_mean, k)
        points.append(simulate_point(cfg, scenario.windows, scenario.seed + k,
                                     scenario.pulses, scenario.chunk_size, threads,
                                     scenario.bootstrap_resamples,
                                     scenario.fast_binomial))
    res = SweepResult(scenario, points)
    if out is not None:
        out = Path(out)
        digest = scenario.digest()
        rows = [r for p in points for r in p.rows()]
        _write(out / "sweep.csv", write_stats_csv(rows, digest=digest))
        buf = io.StringIO()
        buf.write(f"# config_digest={digest}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIT_HEADER)
        w.writerows(res.fit_rows())
        _write(out / "fits.csv", buf.getvalue())
        flagged = {f"{p.n_mean:g}/window_{k}": wr.note
                   for p in points for k, wr in enumerate(p.windows) if wr.note}
        _write(out / "manifest.json", json.dumps(
            _manifest(scenario, "sweep", flagged=flagged), indent=2, sort_keys=True) + "\n")
    return res


@dataclass(frozen=True)
class CheckRow:
    stat: str
    window: Optional[ConditionWindow]
    exact: float
    mc: float
    stderr: float
    passed: bool


@dataclass
class OracleReport:
    rows: list
    sigmas: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self) -> str:
        lines = ["stat,conditioned,window_c,window_w,exact,mc,stderr,deviation_sigma,pass"]
        for r in self.rows:
            dev = abs(r.mc - r.exact) / r.stderr if r.stderr > 0 else math.nan
            cond = r.window is not None
            lines.append(",".join([
                r.stat, fmt(cond),
                fmt(r.window.center_scale if cond else math.nan),
                fmt(r.window.width_sigma if cond else math.nan),
                fmt(r.exact), fmt(r.mc), fmt(r.stderr), fmt(dev),
                "PASS" if r.passed else "FAIL"]))
        return "\n".join(lines) + "\n"


def _compare(stat, window, exact, est, sigmas):
    ok = (math.isfinite(exact) and math.isfinite(est.value)
          and math.isfinite(est.stderr)
          and abs(est.value - exact) <= sigmas * est.stderr)
    if exact == est.value:
        ok = True
    return CheckRow(stat, window, exact, est.value, est.stderr, ok)


def run_oracle_check(scenario: Scenario, threads: int = 1, sigmas: float = 4.0,
                     oracle_config: Optional[ValidatedConfig] = None,
                     out: Optional[Path] = None) -> OracleReport:
    """Compare Monte Carlo estimates with exact enumeration.

    ``oracle_config`` replaces the configuration given to the exact side;
    a deliberately different one is the negative control.  MC windows sit
    on the sampled tap mean and deviation, exact windows on the exact ones.
    """
    cfg = scenario.config()
    check_guard(cfg.source)
    exact_cfg = oracle_config or cfg
    check_guard(exact_cfg.source)
    pmf = exact_pipeline(exact_cfg)
    res = simulate_point(cfg, scenario.windows, scenario.seed, scenario.pulses,
                         scenario.chunk_size, threads, scenario.bootstrap_resamples,
                         scenario.fast_binomial)
    rows = []
    exact = exact_conditional_stats(pmf).as_dict()
    for k in STAT_NAMES:
        rows.append(_compare(k, None, exact[k], res.stats[k], sigmas))
    n = res.ensemble.pulse_count
    for wr in res.windows:
        try:
            ex = exact_conditional_stats(pmf, wr.window)
        except ConditioningError:
            # both sides must agree the window is empty
            mc_acc = 0.0 if wr.ensemble is None else wr.acceptance
            rows.append(CheckRow("acceptance", wr.window, 0.0, mc_acc, 0.0, mc_acc == 0.0))
            continue
        p = ex.acceptance
        rows.append(_compare("acceptance", wr.window, p,
                             Estimate(wr.acceptance, math.sqrt(p * (1 - p) / n)), sigmas))
        exd = ex.as_dict()
        for k in STAT_NAMES:
            rows.append(_compare(k, wr.window, exd[k], wr.stats[k], sigmas))
    report = OracleReport(rows, sigmas)
    if out is not None:
        out = Path(out)
        _write(out / "oracle_check.csv", report.to_csv())
        _write(out / "oracle_pmf.csv", pmf.to_csv())
        _write(out / "manifest.json", json.dumps(
            _manifest(scenario, "oracle-check", passed=report.passed,
                      truncation_tail=pmf.truncation_tail),
            indent=2, sort_keys=True) + "\n")
    return report
