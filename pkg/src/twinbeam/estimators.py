"""Sample statistics with bootstrap errors, and the two fitting procedures.

All variances use the unbiased (n - 1) normalization.  Undefined
statistics (zero variance, zero mean) come back as ``nan``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import optimize

from .montecarlo import Ensemble

DEFAULT_RESAMPLES = 200


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class SampleSummary:
    mean: float
    variance: float
    mdr: float
    count: int


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    residual_rms: float


@dataclass(frozen=True)
class GainFit:
    amplitude_A: float
    rate_B: float
    residual_rms: float
    gain_min: float
    gain_max: float

    def gain(self, power):
        return np.sqrt(self.rate_B * np.asarray(power, dtype=float))

    def predict(self, power):
        return self.amplitude_A * np.sinh(self.gain(power)) ** 2


def _mdr(mean, var):
    return mean / math.sqrt(var) if var > 0 else math.nan


def summarize(samples: Sequence[float]) -> SampleSummary:
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    return SampleSummary(mean, var, _mdr(mean, var), int(x.size))


def g2_sample(samples: Sequence[float]) -> float:
    """(<n^2> - <n>) / <n>^2 from raw sample moments."""
    x = np.asarray(samples, dtype=np.float64)
    m1 = float(x.mean())
    if m1 <= 0:
        return math.nan
    return (float(np.mean(x * x)) - m1) / (m1 * m1)


def _var(x):
    return float(x.var(ddof=1)) if x.size > 1 else math.nan


def _nrf(s, i):
    tot = float((s + i).mean())
    return _var(i - s) / tot if tot > 0 else math.nan


def _fano(s, i):
    tot = float((s + i).mean())
    return _var(i + s) / tot if tot > 0 else math.nan


def _beam_stats(s, i) -> dict:
    ms, mi = float(s.mean()), float(i.mean())
    vs, vi = _var(s), _var(i)
    return {
        "mean_s": ms, "mean_i": mi,
        "var_s": vs, "var_i": vi,
        "mdr_s": _mdr(ms, vs), "mdr_i": _mdr(mi, vi),
        "g2_s": g2_sample(s), "g2_i": g2_sample(i),
        "nrf": _nrf(s, i), "fano": _fano(s, i),
    }


STAT_NAMES = ("mean_s", "mean_i", "var_s", "var_i", "mdr_s", "mdr_i",
              "g2_s", "g2_i", "nrf", "fano")


def bootstrap(stat: Callable[..., dict], columns: Sequence[np.ndarray],
              resamples: int = DEFAULT_RESAMPLES, seed: int = 0) -> dict:
    """Nonparametric bootstrap standard errors for a dict-valued statistic.

    Pulses are resampled jointly across ``columns``.  The error is the
    sample standard deviation of the finite resampled values.
    """
    n = columns[0].shape[0]
    rng = np.random.default_rng(seed)
    draws = {}
    for _ in range(resamples):
        idx = rng.integers(0, n, size=n)
        for key, val in stat(*(c[idx] for c in columns)).items():
            draws.setdefault(key, []).append(val)
    out = {}
    for key, vals in draws.items():
        v = np.asarray(vals, dtype=np.float64)
        v = v[np.isfinite(v)]
        out[key] = float(v.std(ddof=1)) if v.size > 1 else math.nan
    return out


def ensemble_statistics(e: Ensemble, resamples: int = DEFAULT_RESAMPLES,
                        seed: int = 0) -> dict:
    """All per-beam and joint statistics of an ensemble with bootstrap errors."""
    if e.pulse_count < 2:
        return {k: Estimate(math.nan, math.nan) for k in STAT_NAMES}
    s, i = e.signal, e.idler
    values = _beam_stats(s, i)
    errs = bootstrap(_beam_stats, (s, i), resamples, seed) if resamples > 1 else {}
    return {k: Estimate(values[k], errs.get(k, math.nan)) for k in STAT_NAMES}


def _joint_estimate(e, fn, resamples, seed):
    if e.pulse_count < 2:
        raise ValueError("need at least 2 pulses")
    s, i = e.signal, e.idler
    value = fn(s, i)
    if math.isnan(value):
        return Estimate(math.nan, math.nan)
    err = bootstrap(lambda a, b: {"x": fn(a, b)}, (s, i), resamples, seed)["x"]
    return Estimate(value, err)


def nrf(e: Ensemble, bootstrap_resamples: int = DEFAULT_RESAMPLES,
        seed: int = 0) -> Estimate:
    """Var(d_i - d_s) / <d_i + d_s> with a bootstrap error."""
    return _joint_estimate(e, _nrf, bootstrap_resamples, seed)


def fano(e: Ensemble, bootstrap_resamples: int = DEFAULT_RESAMPLES,
         seed: int = 0) -> Estimate:
    """Var(d_i + d_s) / <d_i + d_s> with a bootstrap error."""
    return _joint_estimate(e, _fano, bootstrap_resamples, seed)


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """Ordinary least squares line with residual-variance standard errors."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.size < 3:
        raise FitError("need at least 3 paired points")
    xm = x.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise FitError("rank deficient: all x values equal")
    ym = y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ssr = float(resid @ resid)
    s2 = ssr / (x.size - 2)
    slope_se = math.sqrt(s2 / sxx)
    intercept_se = math.sqrt(s2 * (1.0 / x.size + xm * xm / sxx))
    return FitResult(slope, intercept, slope_se, intercept_se,
                     math.sqrt(ssr / x.size))


def _profiled(log_b, p, s):
    f = np.sinh(np.sqrt(math.exp(log_b) * p)) ** 2
    ff = float(f @ f)
    amp = float(f @ s) / ff
    r = s - amp * f
    return float(r @ r), amp


def gain_fit(powers: Sequence[float], signals: Sequence[float],
             gain_limits=(1e-2, 40.0), grid: int = 400) -> GainFit:
    """Least-squares fit of S = A sinh^2(sqrt(B P)).

    For fixed B the optimal A is linear and closed-form; B is found by a
    log-spaced scan over the gain window ``gain_limits`` followed by a
    bounded Brent search inside the best bracket.
    """
    p = np.asarray(powers, dtype=np.float64)
    s = np.asarray(signals, dtype=np.float64)
    if p.shape != s.shape or p.size < 3:
        raise FitError("need at least 3 (P, S) points")
    if np.any(p <= 0) or not np.all(np.isfinite(s)):
        raise FitError("powers must be > 0 and signals finite")
    g_lo, g_hi = gain_limits
    lb = np.linspace(math.log(g_lo ** 2 / p.max()), math.log(g_hi ** 2 / p.min()), grid)
    ssr = np.array([_profiled(v, p, s)[0] for v in lb])
    k = int(np.argmin(ssr))
    if k == 0 or k == grid - 1:
        raise FitError(
            f"minimum not bracketed: best B={math.exp(lb[k]):.6g} at scan edge "
            f"(SSR {ssr[k]:.6g}, gain window {gain_limits})")
    res = optimize.minimize_scalar(
        lambda v: _profiled(v, p, s)[0], bounds=(lb[k - 1], lb[k + 1]),
        method="bounded", options={"xatol": 1e-13, "maxiter": 500})
    log_b = float(res.x)
    ssr_best, amp = _profiled(log_b, p, s)
    b = math.exp(log_b)
    return GainFit(amp, b, math.sqrt(ssr_best / p.size),
                   math.sqrt(b * p.min()), math.sqrt(b * p.max()))


STATS_HEADER = ["N_m", "stat", "value", "stderr", "conditioned",
                "window_c", "window_w", "seed"]


def fmt(x) -> str:
    """Fixed 12-significant-digit formatting used in every CSV."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def stat_rows(n_mean: float, stats: dict, seed: int, window=None,
              extra: Optional[dict] = None) -> list:
    """Rows of the statistics CSV for one (N_m, window) cell."""
    cond = window is not None
    wc = window.center_scale if cond else math.nan
    ww = window.width_sigma if cond else math.nan
    items = list(stats.items()) + list((extra or {}).items())
    rows = []
    for name, est in items:
        if not isinstance(est, Estimate):
            est = Estimate(float(est), math.nan)
        rows.append([fmt(n_mean), name, fmt(est.value), fmt(est.stderr),
                     fmt(cond), fmt(wc), fmt(ww), fmt(int(seed))])
    return rows


def write_stats_csv(rows: Iterable[list], fh=None, digest: Optional[str] = None):
    own = fh is None
    if own:
        fh = io.StringIO()
    if digest is not None:
        fh.write(f"# config_digest={digest}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(STATS_HEADER)
    w.writerows(rows)
    return fh.getvalue() if own else None
