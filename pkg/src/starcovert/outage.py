"""Outage probabilities under random jamming and residual self-interference, and the rate bounds they imply."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import Beamformers, ChannelSet, StarRisState, SystemConfig, cascade_vectors

_EULER = 0.5772156649015329


def _e1(z: float) -> float:
    """Exponential integral E1(z) for z > 0."""
    if z <= 1.0:
        # E1(z) = -gamma - ln z - sum_{k>=1} (-z)^k / (k k!)
        s = 0.0
        term = 1.0
        k = 1
        while True:
            term *= -z / k
            add = term / k
            s += add
            if abs(add) < 1e-17 * abs(s) or k > 200:
                break
            k += 1
        return -_EULER - math.log(z) - s
    return math.exp(-z) * _e1_cf(z, 1)


def _e1_cf(z: float, n: int) -> float:
    """e^z E_n(z) via the modified Lentz continued fraction (valid for z > ~1)."""
    tiny = 1e-300
    b = z + n
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        a = -i * (n - 1 + i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


def exp_integral_ei(x: float) -> float:
    """Ei(x) = -E1(-x) for x < 0."""
    if not x < 0:
        raise DomainError("exp_integral_ei is only defined here for negative arguments")
    return -_e1(-x)


def _e2(r: float) -> float:
    """E_2(r) = e^{-r} - r E1(r), computed without cancellation for large r."""
    if r == 0.0:
        return 1.0
    if r <= 1.0:
        return math.exp(-r) + r * exp_integral_ei(-r)
    if r > 745.0:
        return 0.0
    return math.exp(-r) * _e1_cf(r, 2)


@dataclass(frozen=True)
class OutageParams:
    upsilon: float
    gamma_cap: float
    P_j_max: float
    phi_sic: float
    R_b: float = 0.0
    R_c: float = 0.0

    def __post_init__(self):
        if not self.P_j_max > 0:
            raise DomainError("P_j_max must be positive")
        if self.R_b < 0 or self.R_c < 0:
            raise DomainError("rates must be nonnegative")


def outage_ab(p: OutageParams) -> float:
    """Outage probability toward the covert user when the jamming power is uniform on [0, P_j_max]."""
    u = p.upsilon
    if u < 0:
        return 1.0
    if u <= p.P_j_max:
        return 1.0 - u / p.P_j_max
    return 0.0


def outage_ac(p: OutageParams) -> float:
    """Outage probability at the full-duplex public user (self-interference ~ exp(phi) times uniform jamming)."""
    g = p.gamma_cap
    if g < 0:
        return 1.0
    scale = p.phi_sic * p.P_j_max
    if scale == 0.0:
        return 0.0
    return _e2(g / scale)


def solve_sigma_star(kappa: float, phi_sic: float, P_j_max: float, rtol: float = 1e-12) -> float:
    """Gamma threshold at which the public-user outage equals ``kappa``, by bisection."""
    if not 0.0 < kappa < 1.0:
        raise DomainError("kappa must lie in (0, 1)")
    scale = phi_sic * P_j_max
    if scale == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while _e2(hi) >= kappa:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _e2(mid) >= kappa:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) * scale


@dataclass(frozen=True)
class LinkPowers:
    """Received powers of both users for a given design (watts)."""
    sig_b: float
    int_b: float
    jam_b: float  # |h_rb^H Theta_t h_rc^*|^2, per watt of jamming
    sig_c: float
    int_c: float


def link_powers(ch: ChannelSet, ris: StarRisState, bf: Beamformers) -> LinkPowers:
    cas = cascade_vectors(ch, ris)
    return LinkPowers(
        sig_b=float(abs(cas.c_r @ bf.w_b) ** 2),
        int_b=float(abs(cas.c_r @ bf.w_c) ** 2),
        jam_b=float(abs(cas.jam_b) ** 2),
        sig_c=float(abs(cas.c_t @ bf.w_c) ** 2),
        int_c=float(abs(cas.c_t @ bf.w_b) ** 2),
    )


def upsilon(lp: LinkPowers, R_b: float, sigma_b2: float) -> float:
    """Jamming power at which the covert link exactly supports rate ``R_b``."""
    s = 2.0 ** R_b - 1.0
    if lp.jam_b == 0.0:
        return math.inf if lp.sig_b - s * (lp.int_b + sigma_b2) >= 0 else -math.inf
    return (lp.sig_b - s * (lp.int_b + sigma_b2)) / (s * lp.jam_b) if s > 0 else math.inf


def gamma_cap(lp: LinkPowers, R_c: float, sigma_c2: float) -> float:
    """Self-interference budget at which the public link exactly supports rate ``R_c``."""
    s = 2.0 ** R_c - 1.0
    if s == 0.0:
        return math.inf
    return (lp.sig_c - s * (lp.int_c + sigma_c2)) / s


def rate_bounds(ch: ChannelSet, ris: StarRisState, bf: Beamformers, config: SystemConfig = None,
                sigma_star: float = None):
    """(R_bb, R_cc): largest rates meeting the outage targets iota and kappa."""
    cfg = config or ch.config
    if sigma_star is None:
        sigma_star = solve_sigma_star(cfg.kappa, cfg.phi_sic, cfg.P_j_max)
    lp = link_powers(ch, ris, bf)
    return rate_bounds_from_powers(lp, cfg, sigma_star)


def rate_bounds_from_powers(lp: LinkPowers, cfg: SystemConfig, sigma_star: float):
    r_bb = math.log2(1.0 + lp.sig_b / (lp.int_b + lp.jam_b * cfg.P_j_max * (1.0 - cfg.iota) + cfg.sigma_b2))
    r_cc = math.log2(1.0 + lp.sig_c / (lp.int_c + sigma_star + cfg.sigma_c2))
    return r_bb, r_cc


def outage_params(ch: ChannelSet, ris: StarRisState, bf: Beamformers, R_b: float, R_c: float,
                  config: SystemConfig = None) -> OutageParams:
    cfg = config or ch.config
    lp = link_powers(ch, ris, bf)
    return OutageParams(upsilon=upsilon(lp, R_b, cfg.sigma_b2), gamma_cap=gamma_cap(lp, R_c, cfg.sigma_c2),
                        P_j_max=cfg.P_j_max, phi_sic=cfg.phi_sic, R_b=R_b, R_c=R_c)


def outage_monte_carlo(lp: LinkPowers, cfg: SystemConfig, R_b: float, R_c: float, n: int, rng: np.random.Generator):
    """Empirical (delta_AB, delta_AC) from direct capacity evaluation under random jamming and self-interference."""
    pj = rng.uniform(0.0, cfg.P_j_max, n)
    gcc = rng.exponential(1.0, n)
    c_b = np.log2(1.0 + lp.sig_b / (lp.int_b + lp.jam_b * pj + cfg.sigma_b2))
    c_c = np.log2(1.0 + lp.sig_c / (lp.int_c + cfg.phi_sic * gcc * pj + cfg.sigma_c2))
    return float(np.mean(R_b > c_b)), float(np.mean(R_c > c_c))
