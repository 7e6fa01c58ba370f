"""Closed-form expectations for thermal and multimode twin beams."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import thermal_lambda
from .specfun import subtracted_g2

_LOG_DOMAIN_ABOVE = 60


@dataclass(frozen=True)
class ModalStatistics:
    g2: float
    fano: float
    nrf: float
    mdr: float


def thermal_pmf(n: int, n_mean: float) -> float:
    """Single-mode thermal probability N_m^n / (N_m + 1)^(n+1)."""
    if n < 0:
        return 0.0
    if n_mean == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(n_mean) - (n + 1) * math.log1p(n_mean))


def multimode_pmf(n: int, modes: int, n_mean: float) -> float:
    """Photon-number probability of the total over ``modes`` thermal modes.

    Negative binomial; factorial ratios switch to log-gamma once n + M > 60.
    """
    if modes < 1:
        raise ValueError("modes must be >= 1")
    if n < 0:
        return 0.0
    if n_mean == 0:
        return 1.0 if n == 0 else 0.0
    if n + modes <= _LOG_DOMAIN_ABOVE:
        coeff = math.comb(n + modes - 1, n)
        return coeff * (n_mean + 1.0) ** (-modes) * (1.0 / n_mean + 1.0) ** (-n)
    log_coeff = math.lgamma(n + modes) - math.lgamma(n + 1) - math.lgamma(modes)
    return math.exp(log_coeff - modes * math.log1p(n_mean)
                    - n * math.log1p(1.0 / n_mean))


def g2_multimode(modes: int) -> float:
    if modes < 1:
        raise ValueError("modes must be >= 1")
    return 1.0 + 1.0 / modes


def g2_subtracted(N: int, n_mean: float) -> float:
    return subtracted_g2(N, n_mean)


def fano_expected(n_mean: float, eta: float) -> float:
    """Normalized variance of the detected photon-number sum, 2 eta N_m + 1."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta out of [0,1]")
    return 2.0 * eta * n_mean + 1.0


def fano_multimode(matched: int, unmatched: int, eta: float, n_mean: float) -> float:
    """Exact detected Fano factor for M matched and K unmatched thermal modes.

    eta (2M + K)(N_m + 1)/(M + K) + 1 - eta; same slope in N_m as
    :func:`fano_expected` when K = 0, intercept larger by eta.
    """
    total = matched + unmatched
    if total < 1:
        raise ValueError("matched + unmatched must be >= 1")
    return eta * (2 * matched + unmatched) * (n_mean + 1.0) / total + 1.0 - eta


def nrf_expected(matched: int, unmatched: int, eta: float, n_mean: float) -> float:
    """Noise reduction factor with M matched and K unmatched modes per beam."""
    total = matched + unmatched
    if total < 1:
        raise ValueError("matched + unmatched must be >= 1")
    return 1.0 - eta * matched / total + eta * n_mean * unmatched / total


def mdr_multimode(modes: int, n_mean: float, formula: str = "exact") -> float:
    """MDR of an M-mode thermal beam.

    ``"exact"`` follows from the negative-binomial moments, sqrt(M lam).
    ``"approx"`` is sqrt(M) N_m / (1 + N_m); the two agree only as N_m grows.
    """
    if modes < 1 or n_mean <= 0:
        raise ValueError("need modes >= 1 and N_m > 0")
    lam = thermal_lambda(n_mean)
    if formula == "exact":
        return math.sqrt(modes * lam)
    if formula == "approx":
        return math.sqrt(modes) * lam
    raise ValueError(f"unknown formula {formula!r}")


def modal_statistics(matched: int, unmatched: int, eta: float,
                     n_mean: float) -> ModalStatistics:
    """Unconditioned per-beam g2 and MDR plus joint Fano and NRF.

    Binomial loss leaves g2 unchanged and turns the per-beam MDR into
    sqrt(M * eta N_m / (eta N_m + 1)).
    """
    modes = matched + unmatched
    seen = eta * n_mean
    return ModalStatistics(
        g2=g2_multimode(modes),
        fano=fano_expected(n_mean, eta),
        nrf=nrf_expected(matched, unmatched, eta, n_mean),
        mdr=math.sqrt(modes * seen / (seen + 1.0)) if seen > 0 else math.nan,
    )
