import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maglev_nmpc.guideway import (IrregularityParams, breakpoints, build_profile, deflection_at,
                                  deflection_slope, excitation_frequency, export_profile,
                                  generate_irregularity, import_profile_samples, segment_slope)


def flat_sag(amplitude=2e-3, length=500.0):
    return build_profile(length, 31.0, amplitude, stochastic=False)


def test_sag_vanishes_at_supports():
    prof = flat_sag()
    assert np.all(deflection_at(prof, 31.0 * np.arange(10)) == 0.0)


def test_sag_peak_at_midspan():
    prof = flat_sag()
    assert deflection_at(prof, 15.5) == 2e-3
    assert deflection_at(prof, 31.0 * 4 + 15.5) == pytest.approx(2e-3, rel=1e-12)


def test_same_seed_same_profile():
    a = build_profile(800.0, seed=11)
    b = build_profile(800.0, seed=11)
    c = build_profile(800.0, seed=12)
    np.testing.assert_array_equal(a.irregularity, b.irregularity)
    assert deflection_at(a, 123.4) == deflection_at(b, 123.4)
    assert not np.array_equal(a.irregularity, c.irregularity)


def test_irregularity_rms_close_to_target():
    params = IrregularityParams(rms=0.5e-3, cutoff_wavelength=10.0, spacing=0.25)
    for seed in (1, 2, 3):
        x = generate_irregularity(seed, 20000 * 0.25, 0.25, params)
        assert abs(np.sqrt(np.mean(x ** 2)) / 0.5e-3 - 1) < 0.10


def test_zero_rms_gives_zero_profile():
    x = generate_irregularity(5, 100.0, 0.25, IrregularityParams(rms=0.0))
    assert np.all(x == 0.0)


def test_excitation_frequency():
    prof = flat_sag()
    f = excitation_frequency(prof, 600 / 3.6)
    assert f == pytest.approx(5.376, abs=5e-4)
    assert excitation_frequency(prof, 2 * 600 / 3.6) == pytest.approx(2 * f)
    longer = build_profile(100.0, 62.0, stochastic=False)
    assert excitation_frequency(longer, 600 / 3.6) == pytest.approx(f / 2)
    with pytest.raises(ValueError):
        excitation_frequency(prof, 0.0)


def test_slope_matches_difference_quotient():
    prof = flat_sag()
    x = np.linspace(1.0, 29.0, 50)
    h = 1e-6
    fd = (deflection_at(prof, x + h) - deflection_at(prof, x - h)) / (2 * h)
    np.testing.assert_allclose(deflection_slope(prof, x), fd, rtol=1e-6, atol=1e-12)


def test_breakpoints_cover_joints_and_samples():
    np.testing.assert_allclose(breakpoints(flat_sag(), 100.0), [31.0, 62.0, 93.0])
    prof = build_profile(10.0, seed=1)
    pts = breakpoints(prof, 3.0)
    np.testing.assert_allclose(pts, np.arange(1, 12) * 0.25)
    assert breakpoints(build_profile(10.0, sag_amplitude=0.0, stochastic=False), 10.0).size == 0


def test_segment_slope_is_one_sided_at_kinks():
    prof = flat_sag()
    # approaching a joint from the left the sag falls, leaving it to the right it rises
    assert segment_slope(prof, 31.0, 30.0) == pytest.approx(-2e-3 * math.pi / 31.0)
    assert segment_slope(prof, 31.0, 32.0) == pytest.approx(2e-3 * math.pi / 31.0)
    rough = build_profile(50.0, sag_amplitude=0.0, seed=2)
    x = np.array([1.0, 1.1, 1.2])
    np.testing.assert_allclose(segment_slope(rough, x, 1.1), deflection_slope(rough, 1.1))
    left = (rough.irregularity[4] - rough.irregularity[3]) / 0.25
    assert segment_slope(rough, 1.0, 0.9) == pytest.approx(left)


def test_export_round_trip(tmp_path):
    prof = build_profile(50.0, seed=4)
    export_profile(prof, tmp_path / "gw.txt")
    pos, val = import_profile_samples(tmp_path / "gw.txt")
    np.testing.assert_array_equal(val, deflection_at(prof, pos))


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0.0, 3000.0), k=st.integers(1, 20))
def test_sag_periodic(x, k):
    prof = flat_sag(length=10.0)
    assert math.isclose(deflection_at(prof, x), deflection_at(prof, x + k * 31.0), abs_tol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), x=st.lists(st.floats(0.0, 400.0), min_size=1, max_size=20))
def test_deflection_bounded(seed, x):
    prof = build_profile(400.0, sag_amplitude=2e-3, seed=seed)
    bound = 2e-3 + np.max(np.abs(prof.irregularity))
    assert np.all(np.abs(deflection_at(prof, np.array(x))) <= bound + 1e-15)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(0.0, 1000.0), eps=st.floats(1e-9, 1e-6))
def test_sag_continuous(x, eps):
    prof = flat_sag(length=10.0)
    assert abs(deflection_at(prof, x + eps) - deflection_at(prof, x)) <= 2e-3 * math.pi / 31.0 * eps * 1.01 + 1e-18
