"""Oracle suites: closed forms checked against Monte-Carlo, grid search and quadrature."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .detection import (AsymptoticParams, DetectionParams, avg_min_dep_lower_bound, avg_min_dep_quadrature,
                        dep_profile, min_dep, optimal_threshold, radiometer_monte_carlo)
from .model import substream
from .outage import OutageParams, exp_integral_ei, outage_ab, outage_ac


@dataclass
class SuiteResult:
    name: str
    passed: bool
    metric: float
    threshold: float
    detail: dict = field(default_factory=dict)


def random_detection_params(rng: np.random.Generator) -> DetectionParams:
    """Parameter sets spanning jamming-dominated to signal-dominated regimes."""
    lam = 10 ** rng.uniform(-1.5, 0.5)
    lam_tilde = lam * (1.0 + 10 ** rng.uniform(-1.0, 1.0))
    gamma = 10 ** rng.uniform(-1.0, 0.7)
    return DetectionParams(lam=lam, lam_tilde=lam_tilde, gamma=gamma, sigma_w2=10 ** rng.uniform(-3, -1),
                           P_j_max=10 ** rng.uniform(-0.5, 0.5), varpi_b=1.0, varpi_c=1.0)


def dep_suite(n_sets: int = 20, n_trials: int = 1_000_000, seed: int = 0, tol: float = 0.005) -> SuiteResult:
    """Closed-form false alarm and missed detection vs. limiting-mode Monte-Carlo at the optimal threshold."""
    rng = substream(seed, 100)
    worst = 0.0
    for k in range(n_sets):
        p = random_detection_params(rng)
        tau = optimal_threshold(p)
        fa, md, _ = dep_profile(tau, p)
        mc = radiometer_monte_carlo(p, tau, n_trials, seed=seed * 1000 + k)
        worst = max(worst, abs(fa - mc.p_fa), abs(md - mc.p_md))
    return SuiteResult("dep-vs-montecarlo", bool(worst <= tol), worst, tol)


def error_curve(taus: np.ndarray, p: DetectionParams) -> np.ndarray:
    """Vectorized false-alarm plus missed-detection probability of the exponential-uniform mixture."""
    t = np.asarray(taus, dtype=float) - p.sigma_w2
    x = p.x

    def tail(lam):
        # P(E + U > t) with E ~ exp(lam), U ~ U(0, x)
        tc = np.clip(t, 0.0, None)
        inside = 1.0 - (tc + lam * np.expm1(-tc / lam)) / x
        outside = -(lam / x) * np.exp(-(tc - x) / lam) * np.expm1(-x / lam)
        return np.where(t < 0, 1.0, np.where(t < x, inside, outside))

    return tail(p.lam) + 1.0 - tail(p.lam_tilde)


def threshold_suite(n_sets: int = 100, grid: int = 100_000, seed: int = 0, tol: float = 1e-4) -> SuiteResult:
    """Optimal threshold against a dense threshold grid, plus the jamming-floor property."""
    rng = substream(seed, 101)
    worst = -math.inf
    floor_ok = True
    for _ in range(n_sets):
        p = random_detection_params(rng)
        tau = optimal_threshold(p)
        floor_ok &= tau >= p.sigma_w2 + p.x - 1e-12 * (1 + tau)
        pe_star = dep_profile(tau, p)[2]
        taus = np.linspace(p.sigma_w2, p.sigma_w2 + p.x + 40.0 * p.lam_tilde, grid)
        worst = max(worst, pe_star - float(np.min(error_curve(taus, p))))
    return SuiteResult("threshold-vs-grid", bool(worst <= tol and floor_ok), worst, tol, {"floor_ok": bool(floor_ok)})


def random_asymptotic(rng: np.random.Generator):
    gain_theta = 10 ** rng.uniform(-1, 1)
    vb = 10 ** rng.uniform(-1.5, 0.3)
    vc = 10 ** rng.uniform(-1, 0.5)
    lam_rw = 10 ** rng.uniform(-1, 1)
    P = 10 ** rng.uniform(-0.5, 0.5)
    a = AsymptoticParams(gain_theta * vc, gain_theta * (vb + vc), 1.0, lam_rw, gain_theta)
    return a, vb, vc, P


def averaged_dep_montecarlo(a: AsymptoticParams, vb: float, vc: float, P: float, n: int, seed: int) -> float:
    """Mean of the large-system minimum DEP over exponential gamma draws."""
    g = substream(seed, 102).exponential(a.lambda_rw, n)
    lam, lt = a.gain_theta * vc, a.gain_theta * (vb + vc)
    x = g * P
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        la = np.where(x / lam > 700, x / lam, np.log(np.expm1(np.minimum(x / lam, 700))))
        lb = np.where(x / lt > 700, x / lt, np.log(np.expm1(np.minimum(x / lt, 700))))
        expo = -(lam / (lt - lam)) * (la - lb)
        val = 1.0 - np.exp(np.log((lt - lam) / x) + lb + expo)
    r = lam / lt
    zero = 1.0 - (r ** (r / (1 - r)) - r ** (1 / (1 - r)))
    val = np.where(x > 0, val, zero)
    return float(np.mean(val))


def bound_suite(n_sets: int = 100, n_mc: int = 1_000_000, n_mc_sets: int = 10, seed: int = 0) -> SuiteResult:
    """Closed-form lower bound <= quadrature, and quadrature vs. Monte-Carlo over gamma."""
    rng = substream(seed, 103)
    worst_order = -math.inf
    worst_mc = 0.0
    for k in range(n_sets):
        a, vb, vc, P = random_asymptotic(rng)
        q = avg_min_dep_quadrature(a, vb, vc, P)
        lb = avg_min_dep_lower_bound(a, vb, vc, P)
        worst_order = max(worst_order, lb - q)
        if k < n_mc_sets:
            worst_mc = max(worst_mc, abs(q - averaged_dep_montecarlo(a, vb, vc, P, n_mc, seed * 1000 + k)))
    ok = worst_order <= 1e-6 and worst_mc <= 1e-3
    return SuiteResult("bound-vs-quadrature", bool(ok), max(worst_order, worst_mc), 1e-3,
                       {"order_violation": worst_order, "mc_error": worst_mc})


def outage_suite(n_sets: int = 20, n_draws: int = 1_000_000, seed: int = 0, tol: float = 0.005) -> SuiteResult:
    """Both outage closed forms vs. direct draws of jamming power and self-interference."""
    rng = substream(seed, 104)
    worst = 0.0
    for k in range(n_sets):
        P = 10 ** rng.uniform(-0.5, 0.5)
        phi = 10 ** rng.uniform(-2, 0)
        p = OutageParams(upsilon=rng.uniform(-0.2, 1.2) * P, gamma_cap=rng.uniform(0.0, 3.0) * phi * P,
                         P_j_max=P, phi_sic=phi)
        s = substream(seed, 105, k)
        pj = s.uniform(0.0, P, n_draws)
        gcc = s.exponential(1.0, n_draws)
        worst = max(worst, abs(outage_ab(p) - np.mean(pj > p.upsilon)),
                    abs(outage_ac(p) - np.mean(phi * gcc * pj > p.gamma_cap)))
    return SuiteResult("outage-vs-montecarlo", bool(worst <= tol), worst, tol)


def ei_suite(n_points: int = 200, tol: float = 1e-10) -> SuiteResult:
    """Ei against direct quadrature of -int_{-x}^inf e^{-t}/t dt on [-50, -1e-6]."""
    xs = -np.logspace(np.log10(1e-6), np.log10(50.0), n_points)
    worst = 0.0
    for x in xs:
        z = -x
        ref, _ = integrate.quad(lambda t: math.exp(-t) / t, z, math.inf, epsabs=0.0, epsrel=1e-13, limit=500)
        worst = max(worst, abs(exp_integral_ei(x) - (-ref)) / ref)
    return SuiteResult("ei-vs-quadrature", bool(worst <= tol), worst, tol)


def min_dep_consistency_suite(n_sets: int = 100, seed: int = 0, tol: float = 1e-10) -> SuiteResult:
    rng = substream(seed, 106)
    worst = 0.0
    for _ in range(n_sets):
        p = random_detection_params(rng)
        worst = max(worst, abs(min_dep(p) - dep_profile(optimal_threshold(p), p)[2]))
    return SuiteResult("min-dep-consistency", bool(worst <= tol), worst, tol)


SUITES = {
    "dep": dep_suite,
    "threshold": threshold_suite,
    "consistency": min_dep_consistency_suite,
    "bound": bound_suite,
    "outage": outage_suite,
    "ei": ei_suite,
}
