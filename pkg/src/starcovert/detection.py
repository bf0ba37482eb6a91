"""Warden-side detection analysis for a radiometer facing uniformly random jamming.

Under H0 the limiting received power at the warden is ``E0 + gamma*P_j + sigma_w2``
with ``E0 ~ exp(lam)``; under H1 it is ``E1 + gamma*P_j + sigma_w2`` with
``E1 ~ exp(lam_tilde)``; ``P_j ~ U(0, P_j_max)``. Everything below is built on
that pair of mixtures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import DegenerateParameterError, DomainError, InconsistentParameterError, QuadratureError
from .model import Beamformers, ChannelSet, StarRisState, cascade_vectors, substream


@dataclass(frozen=True)
class DetectionParams:
    lam: float
    lam_tilde: float
    gamma: float
    sigma_w2: float
    P_j_max: float
    varpi_b: Optional[float] = None
    varpi_c: Optional[float] = None

    def __post_init__(self):
        if self.lam < 0 or self.gamma < 0:
            raise DomainError("lambda and gamma must be nonnegative")
        if self.lam_tilde < self.lam:
            raise DomainError("lambda_tilde must be >= lambda")
        if self.sigma_w2 < 0 or self.P_j_max < 0:
            raise DomainError("sigma_w2 and P_j_max must be nonnegative")

    @property
    def x(self) -> float:
        """Width of the uniform jamming term, gamma * P_j_max."""
        return self.gamma * self.P_j_max

    @property
    def covert_power_zero(self) -> bool:
        if self.varpi_b is not None:
            return self.varpi_b == 0.0
        return self.lam_tilde == self.lam

    @classmethod
    def from_powers(cls, willie_gain: float, varpi_b: float, varpi_c: float, gamma: float,
                    sigma_w2: float, P_j_max: float) -> "DetectionParams":
        return cls(lam=willie_gain * varpi_c, lam_tilde=willie_gain * (varpi_b + varpi_c), gamma=gamma,
                   sigma_w2=sigma_w2, P_j_max=P_j_max, varpi_b=varpi_b, varpi_c=varpi_c)


def detection_params(ch: ChannelSet, ris: StarRisState, bf: Beamformers) -> DetectionParams:
    """Instantaneous (lam, lam_tilde, gamma) for one channel realization."""
    cas = cascade_vectors(ch, ris)
    return DetectionParams.from_powers(cas.willie_gain, bf.varpi_b, bf.varpi_c, abs(cas.jam_w) ** 2,
                                       ch.config.sigma_w2, ch.config.P_j_max)


def _check(p: DetectionParams):
    if p.x == 0.0:
        raise DegenerateParameterError("gamma * P_j_max is zero; the closed forms divide by it")
    if p.lam_tilde == p.lam and not p.covert_power_zero:
        raise InconsistentParameterError("lambda_tilde equals lambda while the covert power is nonzero")


def _cdf_part(t: float, lam: float) -> float:
    """Integral of P(E <= t - s) ds over s in [0, t] for E ~ exp(lam): t + lam*(e^{-t/lam} - 1)."""
    if lam == 0.0:
        return t
    return t + lam * math.expm1(-t / lam)


def _tail_part(t: float, x: float, lam: float) -> float:
    """(lam/x) * e^{-(t-x)/lam} * (e^{x/lam} - 1), i.e. the mean of P(E > t - s), s ~ U(0, x), for t >= x."""
    if lam == 0.0:
        return 0.0
    # e^{-(t-x)/lam} (e^{x/lam}-1) = e^{-t/lam} (e^{x/lam} - 1) = -e^{-(t-x)/lam} expm1(-x/lam)
    return -(lam / x) * math.exp(-(t - x) / lam) * math.expm1(-x / lam)


def dep_profile(tau: float, p: DetectionParams):
    """(P_FA, P_MD, P_e) of the threshold test ``power > tau`` for the given parameters."""
    _check(p)
    t = tau - p.sigma_w2
    x = p.x
    if t < 0:
        fa, md = 1.0, 0.0
    elif t < x:
        fa = 1.0 - _cdf_part(t, p.lam) / x
        md = _cdf_part(t, p.lam_tilde) / x
    else:
        fa = _tail_part(t, x, p.lam)
        md = 1.0 - _tail_part(t, x, p.lam_tilde)
    return fa, md, fa + md


def _log_expm1(a: float) -> float:
    """log(e^a - 1) for a > 0 without overflow."""
    if a == math.inf:
        return math.inf
    return a + math.log(-math.expm1(-a))


def _log_delta(x: float, lam: float, lam_tilde: float) -> float:
    """log of (e^{x/lam} - 1) / (e^{x/lam_tilde} - 1)."""
    a = x / lam if lam > 0 else math.inf
    return _log_expm1(a) - _log_expm1(x / lam_tilde)


def optimal_threshold(p: DetectionParams) -> float:
    """Detection threshold minimizing the detection error probability."""
    _check(p)
    x = p.x
    if p.lam_tilde == p.lam:
        # limit lam_tilde -> lam of lam*lam_t/(lam_t-lam) * ln(Delta)
        lam = p.lam
        if lam == 0.0:
            return p.sigma_w2 + x
        return p.sigma_w2 + x / (-math.expm1(-x / lam))
    if p.lam == 0.0:
        # zero public power: H0 power never exceeds sigma_w2 + x
        return p.sigma_w2 + x
    inv_diff = 1.0 / p.lam - 1.0 / p.lam_tilde
    return p.sigma_w2 + _log_delta(x, p.lam, p.lam_tilde) / inv_diff


def min_dep(p: DetectionParams) -> float:
    """Closed-form detection error probability at the optimal threshold."""
    _check(p)
    if p.covert_power_zero or p.lam_tilde == p.lam:
        return 1.0
    x, lam, lt = p.x, p.lam, p.lam_tilde
    if lam == 0.0:
        expo = -x / lt
    else:
        expo = -(lam / (lt - lam)) * _log_delta(x, lam, lt)
    # 1 - ((lt - lam)/x) * (e^{x/lt} - 1) * Delta^{-lam/(lt-lam)}
    log_term = math.log((lt - lam) / x) + _log_expm1(x / lt) + expo
    return 1.0 - math.exp(log_term)


@dataclass(frozen=True)
class AsymptoticParams:
    lambda_a: float
    lambda_tilde_a: float
    theta_r: float
    lambda_rw: float
    gain: float  # per-unit-theta, per-watt mean reflected power at the warden

    @property
    def gain_theta(self) -> float:
        return self.gain * self.theta_r


def asymptotic_dep_params(ch: ChannelSet, ris: StarRisState, bf: Beamformers) -> AsymptoticParams:
    """Large-system detection parameters, averaged over the warden channel.

    The reflected power reaching the warden per unit transmit power has mean
    ``l_ar * l_rw * theta_r`` (both hops fade independently), so ``gain`` carries
    the product of the two path gains.
    """
    gain = ch.l_ar * ch.l_rw
    theta = ris.theta_r
    lam_rw = float(ch.l_rw * np.sum(ris.beta_t * np.abs(ch.h_rc) ** 2))
    return AsymptoticParams(lambda_a=gain * theta * bf.varpi_c, lambda_tilde_a=gain * theta * (bf.varpi_b + bf.varpi_c),
                            theta_r=theta, lambda_rw=lam_rw, gain=gain)


def asymptotic_min_dep(gamma, gain_theta: float, varpi_b: float, varpi_c: float, P_j_max: float):
    """Minimum DEP with lambda, lambda_tilde replaced by their large-system values, as a function of gamma."""
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    out = np.ones_like(g)
    if varpi_b <= 0:
        return out if np.ndim(gamma) else float(out[0])
    lam = gain_theta * varpi_c
    lt = gain_theta * (varpi_b + varpi_c)
    for i, gi in enumerate(g):
        if gi <= 0:
            # gamma -> 0: the two hypotheses are two exponentials without jamming
            if lam == 0.0:
                out[i] = 0.0
            else:
                # min DEP of exp(lam) vs exp(lt) with threshold at their crossing
                r = lam / lt
                out[i] = 1.0 - (r ** (r / (1 - r)) - r ** (1 / (1 - r)))
            continue
        out[i] = min_dep(DetectionParams(lam=lam, lam_tilde=lt, gamma=gi, sigma_w2=0.0, P_j_max=P_j_max,
                                         varpi_b=varpi_b, varpi_c=varpi_c))
    return out if np.ndim(gamma) else float(out[0])


def avg_min_dep_quadrature(a: AsymptoticParams, varpi_b: float, varpi_c: float, P_j_max: float,
                           abs_tol: float = 1e-8) -> float:
    """Average of the large-system minimum DEP over gamma ~ exp(lambda_rw), by adaptive quadrature."""
    if varpi_b <= 0:
        return 1.0
    if a.lambda_rw <= 0:
        return float(asymptotic_min_dep(0.0, a.gain_theta, varpi_b, varpi_c, P_j_max))
    gt = a.gain_theta

    def f(u):
        return float(asymptotic_min_dep(u * a.lambda_rw, gt, varpi_b, varpi_c, P_j_max)) * math.exp(-u)

    # the integrand is bounded by e^{-u}, so truncating at U costs at most e^{-U}
    upper = max(28.0, math.log(1.0 / abs_tol) + 10.0)
    val, err = integrate.quad(f, 0.0, upper, epsabs=abs_tol * 0.1, epsrel=1e-10, limit=200)
    tail = math.exp(-upper)
    if err > abs_tol:
        raise QuadratureError("average-DEP quadrature did not converge",
                              {"value": val, "error_estimate": err, "upper": upper})
    # integrand on [U, inf) lies in [0, e^{-u}]; add half the tail mass bound
    return float(min(1.0, val + 0.5 * tail))


def avg_min_dep_lower_bound(a: AsymptoticParams, varpi_b: float, varpi_c: float, P_j_max: float) -> float:
    """Closed-form lower bound on the averaged large-system minimum DEP."""
    return lower_bound_from_scalars(a.gain_theta, varpi_b, varpi_c, P_j_max * a.lambda_rw)


def lower_bound_from_scalars(gain_theta: float, varpi_b: float, varpi_c: float, p_lambda_rw: float) -> float:
    if varpi_b <= 0:
        return 1.0
    if p_lambda_rw <= 0:
        raise DegenerateParameterError("P_j_max * lambda_rw must be positive")
    s = gain_theta * (varpi_b + varpi_c)
    return 1.0 - gain_theta * varpi_b * math.log1p(p_lambda_rw / s) / p_lambda_rw


def covert_lhs(gain_theta: float, varpi_b: float, varpi_c: float, p_lambda_rw: float) -> float:
    """Detection-probability side ``1 - lower_bound``; the covert requirement is ``covert_lhs <= epsilon``."""
    return 1.0 - lower_bound_from_scalars(gain_theta, varpi_b, varpi_c, p_lambda_rw)


def delta_exact(gamma: float, a: AsymptoticParams, P_j_max: float) -> float:
    x = gamma * P_j_max
    return math.exp(_log_delta(x, a.lambda_a, a.lambda_tilde_a))


def delta_hat(gamma: float, a: AsymptoticParams, P_j_max: float) -> float:
    x = gamma * P_j_max
    return math.exp(x * (a.lambda_tilde_a - a.lambda_a) / (a.lambda_tilde_a * a.lambda_a))


@dataclass(frozen=True)
class RadiometerResult:
    p_fa: float
    p_md: float
    se_fa: float
    se_md: float
    n_trials: int


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def radiometer_monte_carlo(p: DetectionParams, tau: float, n_trials: int, seed: int = 0,
                           mode: str = "limiting", K: int = 1000, chunk: int = 1_000_000) -> RadiometerResult:
    """Empirical false-alarm and missed-detection rates of the radiometer.

    ``limiting`` draws the average received power directly: exponential signal
    power plus uniform jamming plus noise. ``sample`` synthesizes ``K`` complex
    baseband samples per trial (Gaussian symbols, jamming and noise) and
    thresholds their average power. Both modes use the same per-trial signal
    powers and jamming draws, so their difference isolates the finite-K effect.
    """
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    if mode not in ("limiting", "sample"):
        raise DomainError(f"unknown mode {mode!r}")
    if mode == "sample":
        chunk = max(1, min(chunk, 400_000 // max(K, 1)))
    fa = md = 0
    done = 0
    block = 0
    while done < n_trials:
        n = min(chunk, n_trials - done)
        pj = substream(seed, 0, block).uniform(0.0, p.P_j_max, n)
        e0 = substream(seed, 1, block).exponential(1.0, n) * p.lam
        e1 = substream(seed, 2, block).exponential(1.0, n) * p.lam_tilde
        if mode == "limiting":
            s0 = e0 + p.gamma * pj + p.sigma_w2
            s1 = e1 + p.gamma * pj + p.sigma_w2
        else:
            rng = substream(seed, 3, block)
            s0 = _sample_power(rng, e0, p.gamma * pj, p.sigma_w2, K)
            s1 = _sample_power(rng, e1, p.gamma * pj, p.sigma_w2, K)
        fa += int(np.count_nonzero(s0 > tau))
        md += int(np.count_nonzero(s1 <= tau))
        done += n
        block += 1
    pfa, pmd = fa / n_trials, md / n_trials
    return RadiometerResult(pfa, pmd, _binomial_se(pfa, n_trials), _binomial_se(pmd, n_trials), n_trials)


def _cn(rng, shape):
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)


def _sample_power(rng: np.random.Generator, sig_pow, jam_pow, noise_pow: float, K: int) -> np.ndarray:
    """Average power of K received samples y_k = a s_k + sqrt(jam) j_k + sqrt(noise) n_k with |a|^2 = sig_pow."""
    n = sig_pow.size
    a = np.sqrt(sig_pow) * np.exp(1j * rng.uniform(0.0, 2 * np.pi, n))
    y = a[:, None] * _cn(rng, (n, K))
    y += np.sqrt(jam_pow)[:, None] * _cn(rng, (n, K))
    y += math.sqrt(noise_pow) * _cn(rng, (n, K))
    return np.mean(y.real ** 2 + y.imag ** 2, axis=1)


def mixture_rates(p: DetectionParams, tau: float):
    """Independent oracle: FA and MD by numerically integrating the exponential-uniform mixture CDF."""
    t = tau - p.sigma_w2
    x = p.x

    def tail(lam):
        if t < 0:
            return 1.0
        if lam == 0.0:
            return max(0.0, x - t) / x
        f = lambda s: math.exp(-max(t - s, 0.0) / lam) if s < t else 1.0
        pts = [t] if 0 < t < x else None
        v, _ = integrate.quad(f, 0.0, x, points=pts, epsabs=1e-13, epsrel=1e-12, limit=200)
        return v / x

    fa = tail(p.lam)
    md = 1.0 - tail(p.lam_tilde)
    return fa, md
