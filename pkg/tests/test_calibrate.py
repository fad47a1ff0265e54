import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subcusum.calibrate import (CalibrationSpec, arl_edd_curve, drift_delta, estimate_arl,
                                estimate_edd, eigvec_asymptotic_cov, find_threshold,
                                post_change_increment_mean, simulate_increment_mean)
from subcusum.detectors import ExactCusumConfig, HotellingConfig, SubspaceCusumConfig
from subcusum.errors import CalibrationFailed, DegenerateSpectrum, InvalidInput, ThresholdTooHigh
from subcusum.linalg import random_semi_orthogonal
from subcusum.model import scenario_library


def test_drift_delta():
    assert drift_delta(2, 1.0, 0.5) == pytest.approx(2.5)
    assert drift_delta(1, 2.0, 1.0) == pytest.approx(3.0)
    with pytest.raises(InvalidInput):
        drift_delta(1, 1.0, 0.0)


def test_increment_mean_formula_rank_one():
    # sigma2 (1 + rho) + sigma2 / w (1 + rho) (k - 1) / rho^2
    got = post_change_increment_mean(5, 1, [1.0], 1.0, 100)
    assert got == pytest.approx(2.0 + 2.0 * 4 / 100)


def test_increment_mean_formula_two_directions():
    k, w, s2 = 10, 200, 1.5
    r1, r2 = 1.0, 0.5
    expected = s2 * (2 + r1 + r2)
    expected += s2 / w * (1 + r1) * ((k - 1) / r1**2 + (1 + r2) ** 2 / (r1 - r2) ** 2)
    expected += s2 / w * (1 + r2) * ((k - 1) / r2**2 + (1 + r1) ** 2 / (r2 - r1) ** 2)
    assert post_change_increment_mean(k, 2, [r1, r2], s2, w) == pytest.approx(expected)


def test_increment_mean_rejects_ties():
    with pytest.raises(DegenerateSpectrum):
        post_change_increment_mean(5, 2, [1.0, 1.0], 1.0, 100)
    with pytest.raises(InvalidInput):
        post_change_increment_mean(5, 2, [1.0], 1.0, 100)


@settings(max_examples=30, deadline=None)
@given(k=st.integers(3, 30), w=st.integers(10, 10_000), rho=st.floats(0.1, 10))
def test_increment_mean_tends_to_leading_term(k, w, rho):
    m = post_change_increment_mean(k, 1, [rho], 1.0, w)
    assert m > 1.0 + rho
    assert post_change_increment_mean(k, 1, [rho], 1.0, 10 * w) < m


def test_simulated_pre_change_mean_is_d_sigma2():
    mean, se = simulate_increment_mean(6, 2, [0.0, 0.0], 1.5, 30, 4000, seed=1)
    assert abs(mean - 3.0) <= 4 * se
    again = simulate_increment_mean(6, 2, [0.0, 0.0], 1.5, 30, 4000, seed=1)
    assert again == (mean, se)


def test_simulated_post_change_mean_exceeds_pre():
    mean, se = simulate_increment_mean(5, 1, [2.0], 1.0, 50, 4000, seed=2)
    assert mean > 2.0 and se < 0.2


def test_eigvec_cov_structure():
    U = random_semi_orthogonal(6, 2, 0)
    rho = [2.0, 1.0]
    xi1 = eigvec_asymptotic_cov(1, rho, 1.0, U)
    np.testing.assert_allclose(xi1, xi1.T)
    # no fluctuation along the eigenvector itself
    np.testing.assert_allclose(xi1 @ U[:, 0], 0.0, atol=1e-12)
    assert np.linalg.eigvalsh(xi1).min() > -1e-12
    np.testing.assert_allclose(xi1 @ U[:, 1], 3 * 2 / 1 * U[:, 1])
    Q = np.linalg.qr(np.hstack([U, np.random.default_rng(0).standard_normal((6, 1))]))[0][:, 2]
    assert Q @ xi1 @ Q == pytest.approx(3 / 4)
    with pytest.raises(InvalidInput):
        eigvec_asymptotic_cov(3, rho, 1.0, U)
    with pytest.raises(DegenerateSpectrum):
        eigvec_asymptotic_cov(1, [1.0, 1.0], 1.0, U)


def test_eigvec_cov_rank_one():
    u = np.eye(3)[:, :1]
    xi = eigvec_asymptotic_cov(1, [1.0], 1.0, u)
    np.testing.assert_allclose(xi, 2.0 * np.diag([0.0, 1.0, 1.0]))


def test_hotelling_arl_is_geometric():
    # statistic is chi-square(k); run length is geometric with mean 1 / P(chi2 >= b)
    k, b = 2, 6.0
    p = math.exp(-b / 2)
    est = estimate_arl(HotellingConfig(k, 1.0), b, 2000, seed=4, cap=100_000)
    assert abs(est.arl - 1 / p) <= 4 * est.std_error
    assert est.cap_hits == 0


def test_estimate_arl_all_capped():
    with pytest.raises(ThresholdTooHigh):
        estimate_arl(HotellingConfig(2, 1.0), 1e6, 10, cap=20)


def test_find_threshold_hotelling_oracle():
    # ARL 100 for chi-square(2): b = 2 log 100
    spec = CalibrationSpec(HotellingConfig(2, 1.0), 100.0, replicates=2000, b_lo=2.0, b_hi=30.0,
                           rtol=0.05, seed=1)
    res = find_threshold(spec)
    assert abs(res.arl - 100.0) <= 5.0
    assert res.threshold == pytest.approx(2 * math.log(100), rel=0.06)
    again = find_threshold(spec)
    assert again.threshold == res.threshold


def test_find_threshold_scales_with_sigma2():
    cfg = SubspaceCusumConfig(3, 1, 10, drift_delta(1, 1.0, 0.5), solver="lapack")
    base = find_threshold(CalibrationSpec(cfg, 200.0, 300, 0.5, 30.0, seed=2))
    cfg2 = SubspaceCusumConfig(3, 1, 10, drift_delta(1, 2.0, 0.5), solver="lapack")
    scaled = find_threshold(CalibrationSpec(cfg2, 200.0, 300, 1.0, 60.0, seed=2, sigma2=2.0))
    assert scaled.threshold == pytest.approx(2 * base.threshold, rel=1e-5)


def test_find_threshold_failure():
    spec = CalibrationSpec(HotellingConfig(2, 1.0), 1e4, replicates=100, b_lo=0.0, b_hi=0.01,
                           seed=0)
    with pytest.raises(CalibrationFailed):
        find_threshold(spec)


def test_calibration_spec_validation():
    cfg = HotellingConfig(2, 1.0)
    with pytest.raises(InvalidInput):
        CalibrationSpec(cfg, 100, b_lo=5, b_hi=1)
    with pytest.raises(InvalidInput):
        CalibrationSpec(cfg, 100, replicates=10)
    with pytest.raises(InvalidInput):
        CalibrationSpec(cfg, -1)


def test_edd_exact_cusum_strong_signal():
    scen = scenario_library("rank1-sparse", 3, lam=8.0, tau=0)
    cfg = ExactCusumConfig.from_model(scen.post)
    res = estimate_edd(cfg, 10.0, scen, 300, seed=0)
    assert 1 <= res.edd < 10
    assert res.false_alarms == 0


def test_edd_discards_false_alarms():
    scen = scenario_library("rank1-sparse", 3, lam=1.0, tau=100)
    cfg = HotellingConfig(3, 1.0)
    res = estimate_edd(cfg, 12.0, scen, 100, seed=0)
    assert res.false_alarms > 0
    assert res.replicates == 100
    assert res.edd >= 1


def test_edd_gives_up_when_change_is_unreachable():
    scen = scenario_library("rank1-sparse", 3, lam=1.0, tau=100)
    with pytest.raises(CalibrationFailed):
        estimate_edd(HotellingConfig(3, 1.0), 3.0, scen, 50, seed=0)


def test_arl_edd_curve_is_monotone():
    scen = scenario_library("rank1-sparse", 3, lam=2.0, tau=0)
    cfg = ExactCusumConfig.from_model(scen.post)
    pts = arl_edd_curve(cfg, scen, [2.0, 4.0, 6.0], 200, seed=3)
    assert [p.arl for p in pts] == sorted(p.arl for p in pts)
    assert [p.edd for p in pts] == sorted(p.edd for p in pts)
    with pytest.raises(InvalidInput):
        arl_edd_curve(cfg, scen, [3.0, 2.0], 10)
