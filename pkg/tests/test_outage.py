import math

import numpy as np
import pytest
from scipy import integrate, special

from starcovert.errors import DomainError
from starcovert.model import Beamformers, StarRisState, SystemConfig, generate_channels
from starcovert.outage import (OutageParams, exp_integral_ei, link_powers, outage_ab, outage_ac, outage_monte_carlo,
                               outage_params, rate_bounds, solve_sigma_star)


@pytest.mark.parametrize("x", [-1e-6, -1e-3, -0.2, -0.999, -1.0, -1.001, -3.5, -12.0, -49.9, -50.0])
def test_ei_against_scipy(x):
    assert exp_integral_ei(x) == pytest.approx(special.expi(x), rel=1e-12)


def test_ei_rejects_nonnegative():
    with pytest.raises(DomainError):
        exp_integral_ei(0.0)


def _params(upsilon=0.4, gamma_cap=0.02, P=1.5, phi=0.03):
    return OutageParams(upsilon=upsilon, gamma_cap=gamma_cap, P_j_max=P, phi_sic=phi)


def test_outage_ab_piecewise():
    assert outage_ab(_params(upsilon=-0.1)) == 1.0
    assert outage_ab(_params(upsilon=0.0)) == 1.0
    assert outage_ab(_params(upsilon=0.75)) == pytest.approx(0.5)
    assert outage_ab(_params(upsilon=1.5)) == 0.0
    assert outage_ab(_params(upsilon=9.0)) == 0.0


@pytest.mark.parametrize("r", [0.0, 1e-4, 0.3, 1.0, 2.5, 17.0, 200.0])
def test_outage_ac_against_direct_integral(r):
    P, phi = 2.0, 0.05
    p = _params(gamma_cap=r * phi * P, P=P, phi=phi)
    # P(phi * g * Pj > Gamma) = (1/P) int_0^P exp(-Gamma / (phi s)) ds
    G = p.gamma_cap
    ref = 1.0 if G == 0 else integrate.quad(lambda s: math.exp(-G / (phi * s)), 0.0, P, epsabs=0.0,
                                            epsrel=1e-12, limit=200)[0] / P
    assert outage_ac(p) == pytest.approx(ref, rel=1e-9, abs=1e-300)
    assert outage_ac(p) == pytest.approx(special.expn(2, r), rel=1e-10, abs=1e-300)


def test_outage_ac_negative_budget():
    assert outage_ac(_params(gamma_cap=-1e-3)) == 1.0


def test_outage_ac_monotone():
    vals = [outage_ac(_params(gamma_cap=g)) for g in np.linspace(0, 0.3, 12)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_outage_closed_forms_vs_draws():
    rng = np.random.default_rng(0)
    p = _params()
    pj = rng.uniform(0, p.P_j_max, 400_000)
    g = rng.exponential(1.0, 400_000)
    assert outage_ab(p) == pytest.approx(np.mean(pj > p.upsilon), abs=4e-3)
    assert outage_ac(p) == pytest.approx(np.mean(p.phi_sic * g * pj > p.gamma_cap), abs=4e-3)


def test_sigma_star_hits_target():
    for kappa in (0.01, 0.05, 0.3, 0.9):
        s = solve_sigma_star(kappa, 0.02, 1.3)
        assert special.expn(2, s / (0.02 * 1.3)) == pytest.approx(kappa, rel=1e-9)


def test_sigma_star_domain():
    with pytest.raises(DomainError):
        solve_sigma_star(0.0, 0.1, 1.0)
    assert solve_sigma_star(0.1, 0.0, 1.0) == 0.0


def _design(seed=0):
    cfg = SystemConfig(N=8, M=2)
    ch = generate_channels(cfg, seed)
    rng = np.random.default_rng(seed)
    ris = StarRisState(beta_r=rng.uniform(0.2, 0.8, 8), phi_r=rng.uniform(0, 6, 8), phi_t=rng.uniform(0, 6, 8))
    bf = Beamformers(rng.standard_normal(2) + 1j * rng.standard_normal(2),
                     0.3 * (rng.standard_normal(2) + 1j * rng.standard_normal(2)))
    return cfg, ch, ris, bf


@pytest.mark.parametrize("seed", range(5))
def test_rate_bounds_invert_outage(seed):
    cfg, ch, ris, bf = _design(seed)
    R_bb, R_cc = rate_bounds(ch, ris, bf)
    p = outage_params(ch, ris, bf, R_bb, R_cc)
    assert outage_ab(p) == pytest.approx(cfg.iota, abs=1e-6)
    assert outage_ac(p) == pytest.approx(cfg.kappa, abs=1e-6)


def test_rate_bounds_against_capacity_draws():
    cfg, ch, ris, bf = _design(1)
    R_bb, R_cc = rate_bounds(ch, ris, bf)
    d_ab, d_ac = outage_monte_carlo(link_powers(ch, ris, bf), cfg, R_bb, R_cc, 400_000, np.random.default_rng(2))
    assert d_ab == pytest.approx(cfg.iota, abs=3e-3)
    assert d_ac == pytest.approx(cfg.kappa, abs=3e-3)


def test_outage_params_validation():
    with pytest.raises(DomainError):
        OutageParams(upsilon=0.1, gamma_cap=0.1, P_j_max=0.0, phi_sic=0.1)
    with pytest.raises(DomainError):
        OutageParams(upsilon=0.1, gamma_cap=0.1, P_j_max=1.0, phi_sic=0.1, R_b=-1.0)
