"""Diagonal Gauss hypergeometric series and photon-subtracted state moments.

Only the diagonal case 2F1(1+N, 1+N; 1; lam) = sum_n C(n+N, N)^2 lam^n is
needed.  The series is summed block-wise from the term recurrence

    t_{n+1} = t_n * lam * ((n + 1 + N) / (n + 1))**2

with a running power-of-two free rescaling so that N ~ 100 near lam -> 1
does not overflow; partial sums are accumulated with ``math.fsum``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Moments, thermal_lambda

MAX_TERMS = 10**8
_RESCALE_AT = 1e150


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms_used: int
    tail_bound: float
    log_value: float = 0.0


class SeriesConvergenceError(ArithmeticError):
    """Iteration cap hit before the tail bound met the tolerance.

    The partial result (value and honest tail bound) is kept on ``result``.
    """

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class _Sums:
    sums: tuple          # scaled sum_n n^k t_n for k = 0..len-1
    log_scale: float     # true sums = sums * exp(log_scale)
    terms: int
    rel_tail: tuple      # tail bound / sum, per power
    converged: bool


def _ratio(n, N, lam):
    return lam * ((n + 1.0 + N) / (n + 1.0)) ** 2


def _diag_sums(N, lam, rel_tol, max_degree=0, max_terms=MAX_TERMS):
    """Sum n^k C(n+N,N)^2 lam^n for k = 0..max_degree with a tail bound."""
    degrees = np.arange(max_degree + 1)
    if lam == 0.0:
        return _Sums(tuple(1.0 if k == 0 else 0.0 for k in degrees), 0.0, 1,
                     (0.0,) * (max_degree + 1), True)

    partials = [[] for _ in degrees]
    log_scale = 0.0
    carry = 1.0          # scaled t_{n0}
    n0 = 0
    block = 1024
    rel_tail = (math.inf,) * (max_degree + 1)
    while n0 < max_terms:
        size = min(block, max_terms - n0)
        ns = np.arange(n0, n0 + size, dtype=np.float64)
        ratios = _ratio(ns, N, lam)
        terms = np.empty(size)
        terms[0] = carry
        np.cumprod(ratios[:-1], out=terms[1:])
        terms[1:] *= carry
        carry = terms[-1] * ratios[-1]

        peak = terms.max()
        if peak > _RESCALE_AT:
            terms /= peak
            carry /= peak
            log_scale += math.log(peak)
            for lst in partials:
                lst[:] = [p / peak for p in lst]

        weights = terms.copy()
        for k in degrees:
            if k:
                weights *= ns
            partials[k].append(math.fsum(weights))
        n0 += size

        q = ratios[-1]
        if q < 1.0:
            n_next = float(n0)
            bounds = []
            for k in degrees:
                # ratio of successive n^k t_n beyond n_next never exceeds qk
                qk = _ratio(n_next, N, lam) * ((n_next + 1.0) / max(n_next, 1.0)) ** k
                if qk >= 1.0:
                    bounds.append(math.inf)
                    continue
                first = carry * n_next ** k
                total = math.fsum(partials[k])
                tail = first / (1.0 - qk)
                bounds.append(tail / total if total > 0 else (0.0 if tail == 0 else math.inf))
            rel_tail = tuple(bounds)
            if all(b <= rel_tol for b in rel_tail):
                break
        block = min(block * 2, 1 << 16)

    sums = tuple(math.fsum(p) for p in partials)
    converged = all(b <= rel_tol for b in rel_tail)
    return _Sums(sums, log_scale, n0, rel_tail, converged)


def hyp2f1_diag(N: int, lam: float, rel_tol: float = 1e-15,
                max_terms: int = MAX_TERMS) -> SeriesResult:
    """Evaluate 2F1(1+N, 1+N; 1; lam) for integer N >= 0 and 0 <= lam < 1.

    Returns
    -------
    SeriesResult
        ``value`` may be ``inf`` for very large N with lam near 1; ``log_value``
        stays finite in that case.

    Raises
    ------
    SeriesConvergenceError
        If ``max_terms`` terms do not bring the tail bound under ``rel_tol``.
    """
    if N < 0 or int(N) != N:
        raise ValueError("N must be a non-negative integer")
    if not 0.0 <= lam < 1.0:
        raise ValueError("lam must lie in [0, 1)")
    s = _diag_sums(int(N), float(lam), rel_tol, 0, max_terms)
    log_value = math.log(s.sums[0]) + s.log_scale
    value = math.exp(log_value) if log_value < 709.0 else math.inf
    result = SeriesResult(value, s.terms, s.rel_tail[0] * value, log_value)
    if not s.converged:
        raise SeriesConvergenceError(
            f"2F1 diagonal series not converged after {s.terms} terms "
            f"(relative tail bound {s.rel_tail[0]:.3g})", result)
    return result


def _check_subtraction(N, n_mean):
    if N < 0 or int(N) != N:
        raise ValueError("N must be a non-negative integer")
    if n_mean < 0:
        raise ValueError("N_m must be >= 0")
    if n_mean == 0 and N > 0:
        raise ValueError("cannot subtract photons from vacuum (N_m=0 with N>0)")


def subtracted_pmf(N: int, n_mean: float, n: int) -> float:
    """Photon-number probability of each beam after subtracting N photon pairs."""
    _check_subtraction(N, n_mean)
    if n < 0:
        return 0.0
    if n_mean == 0:
        return 1.0 if n == 0 else 0.0
    lam = thermal_lambda(n_mean)
    log_norm = hyp2f1_diag(N, lam).log_value
    log_term = 2.0 * math.log(math.comb(n + N, N)) + n * math.log(lam)
    return math.exp(log_term - log_norm)


def _raw_moments(N, n_mean, rel_tol):
    _check_subtraction(N, n_mean)
    if n_mean == 0:
        return 0.0, 0.0
    s = _diag_sums(int(N), thermal_lambda(n_mean), rel_tol, 2)
    if not s.converged:
        raise SeriesConvergenceError(
            f"moment series not converged after {s.terms} terms",
            SeriesResult(math.nan, s.terms, max(s.rel_tail)))
    s0, s1, s2 = s.sums
    return s1 / s0, s2 / s0


def subtracted_moments(N: int, n_mean: float, rel_tol: float = 1e-14) -> Moments:
    """Mean and variance of one beam of the N-photon-subtracted twin beam."""
    m1, m2 = _raw_moments(N, n_mean, rel_tol)
    return Moments(m1, max(m2 - m1 * m1, 0.0))


def subtracted_mdr(N: int, n_mean: float, rel_tol: float = 1e-14) -> float:
    """Mean-to-deviation ratio of one subtracted beam."""
    mom = subtracted_moments(N, n_mean, rel_tol)
    if mom.variance <= 0:
        raise ValueError("degenerate variance: MDR undefined (N_m=0)")
    return mom.mean / math.sqrt(mom.variance)


def subtracted_g2(N: int, n_mean: float, rel_tol: float = 1e-14) -> float:
    """(<n^2> - <n>) / <n>^2 for one subtracted beam."""
    m1, m2 = _raw_moments(N, n_mean, rel_tol)
    if m1 <= 0:
        raise ValueError("g2 undefined for zero mean")
    return (m2 - m1) / (m1 * m1)


@dataclass(frozen=True)
class AsymptoticMDR:
    value: float
    branch: str           # "dim" (lam << 1) or "bright" (lam -> 1)
    clamped: bool = False  # radicand was negative: outside the formula's regime


DIM_THRESHOLD = 0.1


def mdr_asymptotic(N: int, n_mean: float) -> AsymptoticMDR:
    """Large-N approximation sqrt(2 lam N -/+ 1) of the subtracted MDR."""
    if N < 1:
        raise ValueError("asymptotic MDR needs N >= 1")
    lam = thermal_lambda(n_mean)
    if lam < DIM_THRESHOLD:
        radicand, branch = 2.0 * lam * N - 1.0, "dim"
    else:
        radicand, branch = 2.0 * lam * N + 1.0, "bright"
    if radicand < 0:
        return AsymptoticMDR(0.0, branch, True)
    return AsymptoticMDR(math.sqrt(radicand), branch)
