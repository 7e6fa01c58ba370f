import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twinbeam.core import (ChannelConfig, ConditionWindow, ConfigError, Moments,
                           SourceConfig, SubtractionSpec, substream, thermal_lambda,
                           validate)

CH = ChannelConfig(0.1, 0.8, 0.8)


def test_fig2_config_is_valid():
    v = validate(SourceConfig(7.0, 91, 9), CH)
    assert v.lam == 0.875
    assert v.channel.eta_tap == 0.8


def test_vacuum_limit():
    v = validate(SourceConfig(0.0, 1, 0), CH)
    assert v.lam == 0.0


def test_tap_ratio_out_of_range():
    with pytest.raises(ConfigError) as info:
        validate(SourceConfig(1.0, 1, 0), replace(CH, tap_ratio=1.2))
    assert "tap_ratio out of [0,1]" in info.value.problems


def test_every_violation_listed():
    with pytest.raises(ConfigError) as info:
        validate(SourceConfig(-1.0, 0, 0),
                 ChannelConfig(1.5, -0.1, 0.5, read_noise_sd=-1.0),
                 ConditionWindow(0.0, 0.0))
    probs = info.value.problems
    assert len(probs) == 6
    assert any("n_mean_per_mode" in p for p in probs)
    assert any("eta_signal" in p for p in probs)


def test_zero_modes_rejected():
    with pytest.raises(ConfigError, match="total mode count"):
        validate(SourceConfig(1.0, 0, 0), CH)


def test_explicit_tap_efficiency_kept():
    v = validate(SourceConfig(1.0, 2, 1), replace(CH, eta_tap=1.0))
    assert v.channel.eta_tap == 1.0


@given(nm=st.floats(0, 1e6), m=st.integers(0, 500), k=st.integers(0, 500),
       r=st.floats(0, 1), e=st.floats(0, 1))
def test_validation_idempotent(nm, m, k, r, e):
    if m + k == 0:
        return
    v = validate(SourceConfig(nm, m, k), ChannelConfig(r, e, e))
    assert validate(v.source, v.channel, v.window) == v
    assert 0 <= v.lam < 1


@given(a=st.floats(0, 1e8), b=st.floats(0, 1e8))
def test_lambda_monotone(a, b):
    if a < b and thermal_lambda(a) != thermal_lambda(b):
        assert thermal_lambda(a) < thermal_lambda(b)
    assert thermal_lambda(a) < 1


def test_window_bounds_closed_full_width():
    lo, hi = ConditionWindow(1.0, 0.5).bounds(10.0, 4.0)
    assert (lo, hi) == (9.0, 11.0)
    lo, hi = ConditionWindow(0.93, 1 / 15).bounds(100.0, 30.0)
    assert lo == pytest.approx(93 - 1) and hi == pytest.approx(93 + 1)
    assert ConditionWindow(1.0, math.inf).bounds(5.0, 1.0) == (-math.inf, math.inf)


def test_moments_mdr_sentinel():
    assert math.isnan(Moments(3.0, 0.0).mdr)
    assert Moments(1.0, 2.0).mdr == pytest.approx(1 / math.sqrt(2))


def test_subtraction_spec():
    assert SubtractionSpec(3).photons_subtracted == 3
    with pytest.raises(ConfigError):
        SubtractionSpec(-1)


def test_substreams_independent_of_order():
    a = substream(5, 2).random(4)
    substream(5, 0).random(100)
    assert np.array_equal(a, substream(5, 2).random(4))
    assert not np.array_equal(a, substream(5, 3).random(4))
    assert not np.array_equal(a, substream(6, 2).random(4))
