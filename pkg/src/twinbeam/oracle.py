"""Exact truncated enumeration of small instances.

Ground truth for the Monte Carlo chain and for the closed forms.  The
probability kernels here are written from scratch (iterated products,
Pascal-style binomial tables, explicit convolutions) and share no code
with ``specfun``, ``analytic`` or ``montecarlo``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .core import (ChannelConfig, ConditionWindow, ConditioningError,
                   GuardError, Moments, SourceConfig, ValidatedConfig,
                   validate)

GUARD_LIMIT = 50.0
MAX_SUPPORT = 96


class TruncationError(RuntimeError):
    pass


def check_guard(source: SourceConfig, limit: float = GUARD_LIMIT):
    """Reject instances too bright for exact enumeration."""
    load = source.total_modes * source.n_mean_per_mode
    if load > limit:
        raise GuardError(
            f"(M+K)*N_m = {load:g} exceeds the exact-enumeration limit {limit:g}")


def _geometric(lam, n_max):
    p = np.empty(n_max + 1)
    p[0] = 1.0 - lam
    for k in range(1, n_max + 1):
        p[k] = p[k - 1] * lam
    return p


def _mode_total(lam, modes, n_max):
    """pmf of a sum of ``modes`` geometric variables, by repeated convolution."""
    out = np.zeros(n_max + 1)
    out[0] = 1.0
    g = _geometric(lam, n_max)
    for _ in range(modes):
        out = np.convolve(out, g)[: n_max + 1]
    return out


def _binomial_table(p, n_max):
    """rows n = 0..n_max of Binomial(n, p) probabilities, Pascal recursion."""
    t = np.zeros((n_max + 1, n_max + 1))
    t[0, 0] = 1.0
    for n in range(1, n_max + 1):
        t[n, : n + 1] = (1.0 - p) * t[n - 1, : n + 1]
        t[n, 1 : n + 1] += p * t[n - 1, :n]
    return t


@dataclass(frozen=True)
class SourcePmf:
    table: np.ndarray          # P(n_s, n_i) on [0, n_max]^2
    n_max: int
    truncation_tail: float


def _support_for(lam, modes, tail_tol, cap):
    n_max = 8
    while True:
        if n_max > cap:
            raise TruncationError(
                f"tail budget {tail_tol:g} needs more than {cap} photons per beam")
        marg = _mode_total(lam, modes, n_max)
        # two beams share the budget
        if 2.0 * (1.0 - math.fsum(marg)) < tail_tol:
            return n_max
        n_max = cap + 1 if n_max == cap else min(int(n_max * 1.5) + 1, cap)


def exact_source_pmf(matched: int, unmatched: int, n_mean: float,
                     tail_tol: float = 1e-12, cap: int = MAX_SUPPORT) -> SourcePmf:
    """Joint photon-number distribution of the two beams at the source.

    The matched total (shared) is negative binomial over M modes; each beam
    adds its own independent unmatched total over K modes.
    """
    if matched + unmatched < 1:
        raise ValueError("need at least one mode")
    lam = n_mean / (n_mean + 1.0)
    if lam == 0.0:
        table = np.ones((1, 1))
        return SourcePmf(table, 0, 0.0)
    n_max = _support_for(lam, matched + unmatched, tail_tol, cap)
    shared = _mode_total(lam, matched, n_max)
    own = _mode_total(lam, unmatched, n_max)
    # shift[m, a] = own[a - m]
    shift = np.zeros((n_max + 1, n_max + 1))
    for m in range(n_max + 1):
        shift[m, m:] = own[: n_max + 1 - m]
    table = shift.T @ (shared[:, None] * shift)
    return SourcePmf(table, n_max, max(0.0, 1.0 - math.fsum(table.ravel())))


@dataclass(frozen=True)
class JointPmf:
    """P(d_s, d_i, n_c) on a truncated support.

    ``table.sum() + truncation_tail`` equals one; statistics derived from
    the table are conditional on the recorded support.
    """

    table: np.ndarray
    truncation_tail: float
    n_max: int

    def marginal(self, axis: str) -> np.ndarray:
        keep = {"d_s": (1, 2), "d_i": (0, 2), "n_c": (0, 1)}[axis]
        return self.table.sum(axis=keep)

    def to_csv(self, fh=None):
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d_s", "d_i", "n_c", "p"])
        for (a, b, c), p in np.ndenumerate(self.table):
            if p > 0:
                w.writerow([a, b, c, f"{p:.12g}"])
        return fh.getvalue() if own else None


def _beam_kernel(n_max, tap_ratio, eta_beam, eta_tap):
    """K[n, d, c]: n photons -> d detected through, c detected at the tap.

    Binomial split onto the tap, then independent thinning of both arms.
    """
    split = _binomial_table(tap_ratio, n_max)
    through = _binomial_table(eta_beam, n_max)
    tapdet = _binomial_table(eta_tap, n_max)
    k = np.zeros((n_max + 1, n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        t = np.arange(n + 1)
        left = split[n, : n + 1][:, None] * through[n - t, :]      # (t, d)
        k[n] = left.T @ tapdet[: n + 1, :]                          # (d, c)
    return k


def exact_pipeline(cfg: ValidatedConfig, tail_tol: float = 1e-12,
                   cap: int = MAX_SUPPORT) -> JointPmf:
    """Propagate the source distribution through tapping and detection exactly."""
    src, ch = cfg.source, cfg.channel
    source = exact_source_pmf(src.matched_modes, src.unmatched_modes,
                              src.n_mean_per_mode, tail_tol, cap)
    n = source.n_max
    eta_tap = ch.eta_signal if ch.eta_tap is None else ch.eta_tap
    ks = _beam_kernel(n, ch.tap_ratio, ch.eta_signal, eta_tap)
    ki = _beam_kernel(n, ch.tap_ratio, ch.eta_idler, eta_tap)
    # b[n_i, d_s, c_s] = sum_{n_s} P(n_s, n_i) ks[n_s, d_s, c_s]
    b = np.tensordot(source.table, ks, axes=(0, 0))
    out = np.zeros((n + 1, n + 1, 2 * n + 1))
    for c_s in range(n + 1):
        part = np.tensordot(b[:, :, c_s], ki, axes=(0, 0))          # (d_s, d_i, c_i)
        out[:, :, c_s : c_s + n + 1] += part
    return JointPmf(out, source.truncation_tail, n)


@dataclass(frozen=True)
class ExactStats:
    signal: Moments
    idler: Moments
    nrf: float
    fano: float
    g2_s: float
    g2_i: float
    acceptance: float
    window_bounds: tuple

    @property
    def mdr_s(self) -> float:
        return self.signal.mdr

    @property
    def mdr_i(self) -> float:
        return self.idler.mdr

    def as_dict(self) -> dict:
        return {
            "mean_s": self.signal.mean, "mean_i": self.idler.mean,
            "var_s": self.signal.variance, "var_i": self.idler.variance,
            "mdr_s": self.mdr_s, "mdr_i": self.mdr_i,
            "g2_s": self.g2_s, "g2_i": self.g2_i,
            "nrf": self.nrf, "fano": self.fano,
        }


def tap_moments(pmf: JointPmf) -> tuple:
    """Exact mean and standard deviation of the tap count."""
    pc = pmf.marginal("n_c")
    pc = pc / pc.sum()
    c = np.arange(pc.size)
    mean = float(pc @ c)
    var = float(pc @ (c - mean) ** 2)
    return mean, math.sqrt(var)


def _expect(w, f):
    return math.fsum((w * f).ravel())


def exact_conditional_stats(pmf: JointPmf, w: ConditionWindow = None) -> ExactStats:
    """Exact statistics given that the tap count lies in the window.

    The window is placed with the exact tap mean and standard deviation.
    ``w=None`` means no conditioning.
    """
    t = pmf.table
    nc = np.arange(t.shape[2])
    if w is None or math.isinf(w.width_sigma):
        lo, hi = -math.inf, math.inf
    else:
        mean_c, sd_c = tap_moments(pmf)
        if sd_c == 0:
            raise ConditioningError("tap count has zero spread")
        lo, hi = w.bounds(mean_c, sd_c)
    sel = (nc >= lo) & (nc <= hi)
    sliced = t[:, :, sel].sum(axis=2)
    total = math.fsum(t.ravel())
    mass = total if sel.all() else math.fsum(sliced.ravel())
    if mass <= 0:
        raise ConditioningError(f"window [{lo:.6g}, {hi:.6g}] holds no probability mass")
    p = sliced / mass
    ds = np.arange(p.shape[0])[:, None].astype(float)
    di = np.arange(p.shape[1])[None, :].astype(float)

    def moments(x):
        m = _expect(p, x)
        return Moments(m, _expect(p, (x - m) ** 2))

    def g2(x):
        m = _expect(p, x)
        return (_expect(p, x * x) - m) / (m * m) if m > 0 else math.nan

    sig = moments(ds + 0 * di)
    idl = moments(di + 0 * ds)
    tot = sig.mean + idl.mean
    diff = moments(di - ds).variance
    summ = moments(di + ds).variance
    return ExactStats(
        signal=sig, idler=idl,
        nrf=diff / tot if tot > 0 else math.nan,
        fano=summ / tot if tot > 0 else math.nan,
        g2_s=g2(ds + 0 * di), g2_i=g2(di + 0 * ds),
        acceptance=mass / total,
        window_bounds=(lo, hi),
    )


def _subtracted_log_weights(N, n_mean, n_max):
    n = np.arange(n_max + 1, dtype=np.float64)
    lam = n_mean / (n_mean + 1.0)
    log_binom = -np.log(n + N + 1.0) - betaln(n + 1.0, N + 1.0)
    return 2.0 * log_binom + n * math.log(lam)


def subtracted_reference_pmf(N: int, n_mean: float, n_max: int) -> np.ndarray:
    """Normalized pmf proportional to C(n+N, N)^2 lam^n on 0..n_max."""
    if n_mean == 0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    lw = _subtracted_log_weights(N, n_mean, n_max)
    w = np.exp(lw - lw.max())
    return w / math.fsum(w)


def reference_n_max(N: int, n_mean: float, tail: float = 1e-16) -> int:
    """Smallest doubling of the support whose geometric tail bound is below ``tail``."""
    n_max = 64
    while _tail_fraction(N, n_mean, n_max) >= tail:
        n_max *= 2
        if n_max > 1 << 24:
            raise TruncationError("support would exceed 2^24 points")
    return n_max


def _tail_fraction(N, n_mean, n_max):
    if n_mean == 0:
        return 0.0
    lam = n_mean / (n_mean + 1.0)
    q = lam * ((n_max + 1.0 + N) / (n_max + 1.0)) ** 2
    if q >= 1.0:
        return math.inf
    lw = _subtracted_log_weights(N, n_mean, n_max)
    w = np.exp(lw - lw.max())
    return w[-1] * q / (1.0 - q) / math.fsum(w)


def exact_subtracted_reference(N: int, n_mean: float, n_max: int) -> Moments:
    """Moments of the N-subtracted beam by direct normalized summation.

    Raises
    ------
    TruncationError
        If the mass beyond ``n_max`` is not provably below 1e-14.
    """
    if n_mean == 0:
        if N > 0:
            raise ValueError("cannot subtract photons from vacuum")
        return Moments(0.0, 0.0)
    if _tail_fraction(N, n_mean, n_max) >= 1e-14:
        raise TruncationError(f"n_max={n_max} leaves tail mass >= 1e-14")
    p = subtracted_reference_pmf(N, n_mean, n_max)
    n = np.arange(n_max + 1, dtype=np.float64)
    mean = math.fsum(p * n)
    var = math.fsum(p * (n - mean) ** 2)
    return Moments(mean, var)


def small_config(matched, unmatched, n_mean, tap_ratio, eta, eta_tap=None):
    """Convenience constructor for enumeration-sized configurations."""
    return validate(SourceConfig(n_mean, matched, unmatched),
                    ChannelConfig(tap_ratio, eta, eta, eta_tap))
