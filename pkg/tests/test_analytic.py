import math

import numpy as np
import pytest

from twinbeam.analytic import (fano_expected, fano_multimode, g2_multimode,
                               g2_subtracted, mdr_multimode, modal_statistics,
                               multimode_pmf, nrf_expected, thermal_pmf)
from twinbeam.specfun import subtracted_mdr


def test_thermal_pmf_values():
    assert thermal_pmf(0, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert thermal_pmf(0, 0.0) == 1.0
    assert thermal_pmf(4, 0.0) == 0.0


def test_thermal_mean_by_summation():
    n = np.arange(400)
    p = np.array([thermal_pmf(k, 7.0) for k in n])
    assert p[-1] < 1e-20
    assert math.fsum(p * n) == pytest.approx(7.0, abs=1e-10)


@pytest.mark.parametrize("nm", [0.3, 1.0, 4.5])
def test_multimode_single_mode_reduction(nm):
    for n in range(30):
        assert multimode_pmf(n, 1, nm) == pytest.approx(thermal_pmf(n, nm), rel=1e-13)


def test_multimode_vacuum_term():
    assert multimode_pmf(0, 2, 1.0) == pytest.approx(0.25, rel=1e-15)


def test_multimode_fig2_moments():
    n = np.arange(3000)
    p = np.array([multimode_pmf(k, 91, 7.0) for k in n])
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-12)
    mean = math.fsum(p * n)
    assert mean == pytest.approx(637.0, rel=1e-10)
    assert math.fsum(p * (n - mean) ** 2) == pytest.approx(5096.0, rel=1e-9)


def test_multimode_log_domain_continuity():
    # switch-over at n + M = 60 must not jump
    a = multimode_pmf(30, 30, 2.0)
    b = math.comb(59, 30) * 3.0 ** -30 * 1.5 ** -30
    assert a == pytest.approx(b, rel=1e-12)
    c = multimode_pmf(31, 30, 2.0)
    d = math.comb(60, 31) * 3.0 ** -30 * 1.5 ** -31
    assert c == pytest.approx(d, rel=1e-12)


@pytest.mark.parametrize("modes", [2, 3, 4, 5])
@pytest.mark.parametrize("nm", [0.5, 1.0, 3.0])
def test_multimode_is_self_convolution(modes, nm):
    n_max = 250
    th = np.array([thermal_pmf(k, nm) for k in range(n_max)])
    assert th[-1] < 1e-14 / n_max
    conv = th.copy()
    for _ in range(modes - 1):
        conv = np.convolve(conv, th)[:n_max]
    mm = np.array([multimode_pmf(k, modes, nm) for k in range(n_max)])
    assert np.max(np.abs(conv - mm)) < 1e-12


def test_g2_multimode():
    assert g2_multimode(1) == 2.0
    assert g2_multimode(4) == 1.25
    assert abs(g2_multimode(10 ** 6) - 1.0) < 1e-6


def test_g2_subtracted_thermal():
    assert g2_subtracted(0, 5.0) == pytest.approx(2.0, rel=1e-12)


def test_g2_subtracted_threshold_behaviour():
    assert min(g2_subtracted(N, 0.2) for N in range(60)) < 1.0
    assert min(g2_subtracted(N, 0.5) for N in range(201)) >= 1.0 - 1e-9


def test_fano_expected():
    assert fano_expected(100.0, 0.63) == pytest.approx(127.0, rel=1e-15)
    assert fano_expected(55.0, 0.0) == 1.0
    slope = (fano_expected(300.0, 0.63) - fano_expected(100.0, 0.63)) / 200.0
    assert slope == pytest.approx(1.26, rel=1e-12)


def test_fano_multimode_matches_slope_of_simple_form():
    for eta in (0.3, 0.63, 1.0):
        s = (fano_multimode(100, 0, eta, 50.0) - fano_multimode(100, 0, eta, 10.0)) / 40.0
        assert s == pytest.approx(2 * eta, rel=1e-12)
        assert fano_multimode(100, 0, eta, 7.0) - fano_expected(7.0, eta) == pytest.approx(eta)


def test_nrf_expected():
    assert nrf_expected(10, 0, 1.0, 123.0) == 0.0
    assert nrf_expected(91, 9, 0.8, 7.0) == pytest.approx(0.776, rel=1e-14)
    slope = (nrf_expected(91, 9, 0.63, 9.0) - nrf_expected(91, 9, 0.63, 2.0)) / 7.0
    assert slope == pytest.approx(0.63 * 9 / 100, rel=1e-12)


def test_mdr_multimode_forms():
    assert mdr_multimode(91, 7.0) == pytest.approx(math.sqrt(91 * 0.875), rel=1e-15)
    assert mdr_multimode(91, 7.0) == pytest.approx(8.923, abs=5e-4)
    assert mdr_multimode(91, 7.0, "approx") == pytest.approx(8.347, abs=5e-4)
    for nm in (0.2, 3.0):
        assert mdr_multimode(1, nm) == pytest.approx(subtracted_mdr(0, nm), rel=1e-12)
    with pytest.raises(ValueError):
        mdr_multimode(3, 1.0, "other")


def test_modal_statistics_bundle():
    ms = modal_statistics(91, 9, 0.72, 7.0)
    assert ms.g2 == pytest.approx(1.01)
    assert ms.nrf == pytest.approx(nrf_expected(91, 9, 0.72, 7.0))
    assert ms.fano >= 1 and ms.nrf >= 0
    # eta = 1 reduces to the exact undetected MDR
    assert modal_statistics(91, 9, 1.0, 7.0).mdr == pytest.approx(mdr_multimode(100, 7.0))
