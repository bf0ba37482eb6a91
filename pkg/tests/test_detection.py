import math

import numpy as np
import pytest
from scipy import optimize

from starcovert.detection import (AsymptoticParams, DetectionParams, asymptotic_dep_params, asymptotic_min_dep,
                                  avg_min_dep_lower_bound, avg_min_dep_quadrature, covert_lhs, delta_exact, delta_hat,
                                  dep_profile, detection_params, min_dep, mixture_rates, optimal_threshold,
                                  radiometer_monte_carlo)
from starcovert.errors import DegenerateParameterError, DomainError, InconsistentParameterError
from starcovert.model import Beamformers, StarRisState, SystemConfig, generate_channels
from starcovert.suites import averaged_dep_montecarlo, random_asymptotic, random_detection_params

P0 = DetectionParams(lam=0.4, lam_tilde=1.1, gamma=0.8, sigma_w2=0.05, P_j_max=1.5, varpi_b=1.0, varpi_c=1.0)


@pytest.mark.parametrize("frac", [-0.3, 0.0, 0.2, 0.7, 1.0, 1.4, 3.0, 10.0])
def test_dep_profile_matches_mixture_quadrature(frac):
    tau = P0.sigma_w2 + frac * P0.x
    fa, md, pe = dep_profile(tau, P0)
    fa_q, md_q = mixture_rates(P0, tau)
    assert fa == pytest.approx(fa_q, abs=1e-11)
    assert md == pytest.approx(md_q, abs=1e-11)
    assert pe == pytest.approx(fa + md, abs=0)


def test_dep_profile_continuous_at_jamming_edge():
    edge = P0.sigma_w2 + P0.x
    lo = dep_profile(edge * (1 - 1e-12), P0)
    hi = dep_profile(edge * (1 + 1e-12), P0)
    assert np.allclose(lo, hi, atol=1e-9)


def test_dep_profile_below_noise_floor():
    assert dep_profile(P0.sigma_w2 / 2, P0)[:2] == (1.0, 0.0)


def test_optimal_threshold_is_stationary_minimum():
    tau = optimal_threshold(P0)
    res = optimize.minimize_scalar(lambda t: dep_profile(t, P0)[2], bounds=(P0.sigma_w2, 50.0), method="bounded",
                                   options={"xatol": 1e-12})
    assert dep_profile(tau, P0)[2] <= res.fun + 1e-12
    assert tau >= P0.sigma_w2 + P0.x


def test_optimal_threshold_on_random_sets():
    rng = np.random.default_rng(7)
    for _ in range(30):
        p = random_detection_params(rng)
        tau = optimal_threshold(p)
        h = 1e-6 * max(tau, 1.0)
        pe = dep_profile(tau, p)[2]
        assert pe <= dep_profile(tau + h, p)[2] + 1e-12
        assert pe <= dep_profile(tau - h, p)[2] + 1e-12
        assert tau >= p.sigma_w2 + p.x - 1e-12 * tau


def test_min_dep_equals_profile_at_optimum():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = random_detection_params(rng)
        assert abs(min_dep(p) - dep_profile(optimal_threshold(p), p)[2]) <= 1e-10


def test_min_dep_extreme_ratio_is_finite():
    p = DetectionParams(lam=1e-4, lam_tilde=2e-4, gamma=5.0, sigma_w2=0.0, P_j_max=2.0)
    v = min_dep(p)
    assert math.isfinite(v) and 0.0 <= v <= 1.0
    assert v == pytest.approx(dep_profile(optimal_threshold(p), p)[2], abs=1e-10)


def test_zero_covert_power_is_undetectable():
    p = DetectionParams.from_powers(0.3, 0.0, 1.0, gamma=0.5, sigma_w2=0.01, P_j_max=1.0)
    assert min_dep(p) == 1.0


def test_zero_public_power_threshold_at_edge():
    p = DetectionParams(lam=0.0, lam_tilde=0.5, gamma=1.0, sigma_w2=0.1, P_j_max=1.0)
    assert optimal_threshold(p) == pytest.approx(1.1)
    assert min_dep(p) == pytest.approx(dep_profile(1.1, p)[2], abs=1e-12)


def test_degenerate_jamming_raises():
    with pytest.raises(DegenerateParameterError):
        min_dep(DetectionParams(lam=0.1, lam_tilde=0.2, gamma=0.0, sigma_w2=0.0, P_j_max=1.0))


def test_inconsistent_parameters_raise():
    with pytest.raises(InconsistentParameterError):
        min_dep(DetectionParams(lam=0.3, lam_tilde=0.3, gamma=1.0, sigma_w2=0.0, P_j_max=1.0, varpi_b=0.5,
                                varpi_c=1.0))


def test_domain_errors():
    with pytest.raises(DomainError):
        DetectionParams(lam=0.5, lam_tilde=0.4, gamma=1.0, sigma_w2=0.0, P_j_max=1.0)
    with pytest.raises(DomainError):
        DetectionParams(lam=-0.1, lam_tilde=0.4, gamma=1.0, sigma_w2=0.0, P_j_max=1.0)


def test_monte_carlo_agrees_with_closed_form():
    tau = optimal_threshold(P0)
    fa, md, _ = dep_profile(tau, P0)
    mc = radiometer_monte_carlo(P0, tau, 200_000, seed=1)
    assert abs(mc.p_fa - fa) <= 5 * mc.se_fa + 1e-4
    assert abs(mc.p_md - md) <= 5 * mc.se_md + 1e-4


def test_monte_carlo_reproducible():
    a = radiometer_monte_carlo(P0, 2.0, 10_000, seed=4)
    b = radiometer_monte_carlo(P0, 2.0, 10_000, seed=4)
    assert a == b


def test_sample_mode_approaches_limit_for_many_samples():
    tau = optimal_threshold(P0)
    lim = radiometer_monte_carlo(P0, tau, 4000, seed=2)
    smp = radiometer_monte_carlo(P0, tau, 4000, seed=2, mode="sample", K=2000)
    assert abs(lim.p_fa - smp.p_fa) < 0.03
    assert abs(lim.p_md - smp.p_md) < 0.03


def test_detection_params_from_channels():
    cfg = SystemConfig(N=8, M=2)
    ch = generate_channels(cfg, 0)
    ris = StarRisState(beta_r=np.full(8, 0.5), phi_r=np.zeros(8), phi_t=np.zeros(8))
    bf = Beamformers(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    p = detection_params(ch, ris, bf)
    assert p.lam_tilde == pytest.approx(2 * p.lam)
    assert p.P_j_max == cfg.P_j_max


def test_asymptotic_params_scale_with_theta():
    cfg = SystemConfig(N=10, M=2)
    ch = generate_channels(cfg, 1)
    bf = Beamformers(np.array([0.5, 0.0]), np.array([0.0, 1.0]))
    half = asymptotic_dep_params(ch, StarRisState(beta_r=np.full(10, 0.5), phi_r=np.zeros(10), phi_t=np.zeros(10)), bf)
    full = asymptotic_dep_params(ch, StarRisState(beta_r=np.ones(10), phi_r=np.zeros(10), phi_t=np.zeros(10)), bf)
    assert full.lambda_a == pytest.approx(2 * half.lambda_a)
    assert full.lambda_rw == 0.0
    assert half.lambda_tilde_a == pytest.approx(half.lambda_a * 1.25)


def test_asymptotic_min_dep_small_gamma_limit():
    v0 = asymptotic_min_dep(0.0, 1.0, 0.4, 1.0, 1.0)
    v1 = asymptotic_min_dep(1e-7, 1.0, 0.4, 1.0, 1.0)
    assert v1 == pytest.approx(v0, abs=1e-5)


def test_asymptotic_min_dep_increases_with_gamma():
    vals = asymptotic_min_dep(np.linspace(0.01, 5, 20), 1.0, 0.4, 1.0, 1.0)
    assert np.all(np.diff(vals) > 0)


def test_lower_bound_below_quadrature():
    rng = np.random.default_rng(11)
    for _ in range(30):
        a, vb, vc, P = random_asymptotic(rng)
        assert avg_min_dep_lower_bound(a, vb, vc, P) <= avg_min_dep_quadrature(a, vb, vc, P) + 1e-6


def test_quadrature_against_montecarlo():
    a = AsymptoticParams(0.5, 0.8, 1.0, 2.0, 1.0)
    q = avg_min_dep_quadrature(a, 0.3, 0.5, 1.0)
    mc = averaged_dep_montecarlo(a, 0.3, 0.5, 1.0, 400_000, seed=5)
    assert q == pytest.approx(mc, abs=2e-3)


def test_bound_and_quadrature_trivial_without_covert_power():
    a = AsymptoticParams(0.5, 0.5, 1.0, 2.0, 1.0)
    assert avg_min_dep_lower_bound(a, 0.0, 0.5, 1.0) == 1.0
    assert avg_min_dep_quadrature(a, 0.0, 0.5, 1.0) == 1.0


def test_covert_lhs_increases_with_covert_power():
    vals = [covert_lhs(1.0, vb, 0.5, 2.0) for vb in (0.01, 0.1, 0.5, 1.0, 3.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert covert_lhs(1.0, 0.0, 0.5, 2.0) == 0.0


def test_delta_hat_underestimates_delta():
    a = AsymptoticParams(0.4, 0.9, 1.0, 1.0, 1.0)
    for g in (0.01, 0.3, 1.0, 4.0, 20.0):
        assert delta_hat(g, a, 1.0) <= delta_exact(g, a, 1.0) * (1 + 1e-12)
    assert delta_hat(60.0, a, 1.0) == pytest.approx(delta_exact(60.0, a, 1.0), rel=1e-6)
