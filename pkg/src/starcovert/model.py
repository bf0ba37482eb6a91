"""System model: configuration, channel draws, STAR-RIS coefficients and cascaded channels.

All powers are linear watts, all gains are linear power gains. dB conversions
happen only at the configuration boundary (see :func:`parse_quantity`).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * np.pi

# substream tags for the per-element channel generators
_STREAM_AR, _STREAM_RB, _STREAM_RC, _STREAM_RW, _STREAM_CC = range(5)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


_UNIT_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*(dbw|dbm|db|w|mw)?\s*$", re.IGNORECASE)


def parse_quantity(text: str) -> float:
    """Parse ``"6 dBw"``, ``"-140dBm"``, ``"-20 dB"``, ``"0.5 W"`` or a bare number to linear units."""
    m = _UNIT_RE.match(str(text))
    if not m:
        raise ValueError(f"cannot parse quantity {text!r}")
    value = float(m.group(1))
    unit = (m.group(2) or "").lower()
    if unit in ("dbw", "db"):
        return db_to_linear(value)
    if unit == "dbm":
        return dbm_to_watts(value)
    if unit == "mw":
        return value * 1e-3
    return value


@dataclass(frozen=True)
class SystemConfig:
    """Physical and requirement scalars of one covert-communication scenario.

    Defaults follow the simulation setup of the reference scenario (M=3, N=30,
    P_max = 3 dBW, P_j_max = 0 dBW, -140 dBm noise, -160 dB SIC, rho0 = -20 dB,
    alpha = 2.6). Willie's noise power is not specified there; it defaults to the
    same -140 dBm as the legitimate receivers.
    """

    M: int = 3
    N: int = 30
    P_max: float = db_to_linear(3.0)
    P_j_max: float = 1.0
    sigma_b2: float = dbm_to_watts(-140.0)
    sigma_c2: float = dbm_to_watts(-140.0)
    sigma_w2: float = dbm_to_watts(-140.0)
    phi_sic: float = db_to_linear(-160.0)
    rho0: float = db_to_linear(-20.0)
    alpha: float = 2.6
    d_ar: float = 500.0
    d_rb: float = 100.0
    d_rc: float = 150.0
    d_rw: float = 80.0
    epsilon: float = 0.1
    iota: float = 0.1
    kappa: float = 0.1
    R_star: float = 4.0
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise DomainError(f"M must be a positive integer, got {self.M}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))
        for name in ("P_max", "P_j_max", "sigma_b2", "sigma_c2", "sigma_w2",
                     "rho0", "d_ar", "d_rb", "d_rc", "d_rw"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")
        for name in ("epsilon", "iota", "kappa"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise DomainError(f"{name} must lie in (0, 1)")
        if not 0.0 <= self.phi_sic <= 1.0:
            raise DomainError("phi_sic must lie in [0, 1]")
        if self.R_star < 0:
            raise DomainError("R_star must be nonnegative")
        if self.alpha < 0:
            raise DomainError("alpha must be nonnegative")

    @property
    def l_ar(self) -> float:
        return path_loss_gain(self.d_ar, self.rho0, self.alpha)

    @property
    def l_rb(self) -> float:
        return path_loss_gain(self.d_rb, self.rho0, self.alpha)

    @property
    def l_rc(self) -> float:
        return path_loss_gain(self.d_rc, self.rho0, self.alpha)

    @property
    def l_rw(self) -> float:
        return path_loss_gain(self.d_rw, self.rho0, self.alpha)

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def path_loss_gain(d: float, rho0: float, alpha: float) -> float:
    """Large-scale power gain ``rho0 / d**alpha`` used as the variance of channel entries."""
    if not d > 0:
        raise DomainError(f"distance must be positive, got {d}")
    return rho0 * d ** (-alpha)


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circular complex Gaussian draws."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based (Philox) generator addressed by ``seed`` and an integer key path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every channel in the scenario (entries already path-loss scaled)."""

    config: SystemConfig
    H_ar: np.ndarray  # N x M
    h_rb: np.ndarray  # N
    h_rc: np.ndarray  # N
    h_rw: np.ndarray  # N
    h_cc: complex
    seed: int = 0

    def __post_init__(self):
        N, M = self.config.N, self.config.M
        if self.H_ar.shape != (N, M):
            raise DomainError(f"H_ar must be {N}x{M}, got {self.H_ar.shape}")
        for name in ("h_rb", "h_rc", "h_rw"):
            if getattr(self, name).shape != (N,):
                raise DomainError(f"{name} must have length {N}")
        for name in ("H_ar", "h_rb", "h_rc", "h_rw"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=complex)))

    @property
    def l_ar(self) -> float:
        return self.config.l_ar

    @property
    def l_rb(self) -> float:
        return self.config.l_rb

    @property
    def l_rc(self) -> float:
        return self.config.l_rc

    @property
    def l_rw(self) -> float:
        return self.config.l_rw


def generate_channels(config: SystemConfig, seed: Optional[int] = None) -> ChannelSet:
    """Draw one Rayleigh-fading realization of all channels.

    Every STAR-RIS element ``n`` owns its own substreams, so a realization with
    ``N`` elements is a prefix of the realization with ``N + k`` elements under
    the same seed (and likewise for the antenna count). Sweeps over ``N`` and
    ``M`` are therefore nested.
    """
    seed = config.rng_seed if seed is None else int(seed)
    N, M = config.N, config.M
    H = np.empty((N, M), dtype=complex)
    g = np.empty((3, N), dtype=complex)
    for n in range(N):
        H[n] = _cn(substream(seed, _STREAM_AR, n), (M,))
        for k, tag in enumerate((_STREAM_RB, _STREAM_RC, _STREAM_RW)):
            g[k, n] = _cn(substream(seed, tag, n), (1,))[0]
    g_cc = _cn(substream(seed, _STREAM_CC), (1,))[0]
    return ChannelSet(
        config=config,
        H_ar=np.sqrt(config.l_ar) * H,
        h_rb=np.sqrt(config.l_rb) * g[0],
        h_rc=np.sqrt(config.l_rc) * g[1],
        h_rw=np.sqrt(config.l_rw) * g[2],
        h_cc=complex(np.sqrt(config.phi_sic) * g_cc),
        seed=seed,
    )


@dataclass(frozen=True)
class StarRisState:
    """Energy-splitting STAR-RIS coefficients.

    Only ``beta_r`` is free; ``beta_t`` is stored as ``1 - beta_r`` so the
    per-element energy conservation holds by construction.
    """

    beta_r: np.ndarray
    phi_r: np.ndarray
    phi_t: np.ndarray
    beta_t: np.ndarray = field(default=None)

    def __post_init__(self):
        br = np.clip(np.asarray(self.beta_r, dtype=float), 0.0, 1.0)
        if self.beta_t is not None:
            bt = np.asarray(self.beta_t, dtype=float)
            if bt.shape != br.shape or np.max(np.abs(br + bt - 1.0), initial=0.0) > 1e-12:
                raise DomainError("beta_r + beta_t must equal 1 element-wise")
        if np.shape(self.phi_r) != br.shape or np.shape(self.phi_t) != br.shape:
            raise DomainError("phase vectors must match the amplitude vector length")
        object.__setattr__(self, "beta_r", _frozen(br))
        object.__setattr__(self, "beta_t", _frozen(1.0 - br))
        object.__setattr__(self, "phi_r", _frozen(np.mod(np.asarray(self.phi_r, dtype=float), TWO_PI)))
        object.__setattr__(self, "phi_t", _frozen(np.mod(np.asarray(self.phi_t, dtype=float), TWO_PI)))
        # mod can return exactly 2*pi for tiny negative inputs
        for name in ("phi_r", "phi_t"):
            p = getattr(self, name)
            if np.any(p >= TWO_PI):
                object.__setattr__(self, name, _frozen(np.where(p >= TWO_PI, 0.0, p)))

    @property
    def N(self) -> int:
        return self.beta_r.size

    @property
    def vartheta_r(self) -> np.ndarray:
        return np.sqrt(self.beta_r) * np.exp(1j * self.phi_r)

    @property
    def vartheta_t(self) -> np.ndarray:
        return np.sqrt(self.beta_t) * np.exp(1j * self.phi_t)

    @property
    def theta_r(self) -> float:
        """Total reflected energy fraction, sum of ``beta_r``."""
        return float(np.sum(self.beta_r))

    @classmethod
    def uniform(cls, N: int, rng: np.random.Generator, beta_r: float = 0.5) -> "StarRisState":
        return cls(beta_r=np.full(N, beta_r), phi_r=rng.uniform(0, TWO_PI, N), phi_t=rng.uniform(0, TWO_PI, N))

    @classmethod
    def from_vectors(cls, vartheta_r, vartheta_t) -> "StarRisState":
        """Build from complex coefficient vectors; amplitudes are renormalized onto beta_r + beta_t = 1."""
        pr = np.abs(vartheta_r) ** 2
        pt = np.abs(vartheta_t) ** 2
        tot = pr + pt
        beta_r = np.where(tot > 0, pr / np.where(tot > 0, tot, 1.0), 0.5)
        return cls(beta_r=beta_r, phi_r=np.angle(vartheta_r), phi_t=np.angle(vartheta_t))


@dataclass(frozen=True)
class Beamformers:
    w_b: np.ndarray
    w_c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w_b", _frozen(np.asarray(self.w_b, dtype=complex)))
        object.__setattr__(self, "w_c", _frozen(np.asarray(self.w_c, dtype=complex)))

    @property
    def varpi_b(self) -> float:
        return float(np.real(np.vdot(self.w_b, self.w_b)))

    @property
    def varpi_c(self) -> float:
        return float(np.real(np.vdot(self.w_c, self.w_c)))


@dataclass(frozen=True)
class Cascade:
    """Effective channels for one (channels, STAR-RIS) pair.

    ``c_r`` and ``c_t`` are the row vectors ``h_rb^H Theta_r H_ar`` and
    ``h_rc^H Theta_t H_ar``; ``jam_b`` and ``jam_w`` are the jamming paths
    ``h_rb^H Theta_t h_rc^*`` and ``h_rw^H Theta_t h_rc^*``.
    """

    c_r: np.ndarray
    c_t: np.ndarray
    jam_b: complex
    jam_w: complex
    willie_gain: float  # l_ar * ||h_rw^H Theta_r||^2
    theta_r: float
    lambda_rw: float  # mean of |jam_w|^2 over h_rw


def diag_cascades(ch: ChannelSet):
    """The matrices ``Diag(h_rb^*) H_ar`` and ``Diag(h_rc^*) H_ar`` and the jamming vector ``h_rb^* o h_rc^*``."""
    Hb = ch.h_rb.conj()[:, None] * ch.H_ar
    Hc = ch.h_rc.conj()[:, None] * ch.H_ar
    e = ch.h_rb.conj() * ch.h_rc.conj()
    return Hb, Hc, e


def cascade_vectors(ch: ChannelSet, ris: StarRisState) -> Cascade:
    if ris.N != ch.config.N:
        raise DomainError("STAR-RIS size does not match the channel set")
    Hb, Hc, e = diag_cascades(ch)
    vr, vt = ris.vartheta_r, ris.vartheta_t
    return Cascade(
        c_r=vr @ Hb,
        c_t=vt @ Hc,
        jam_b=complex(vt @ e),
        jam_w=complex(vt @ (ch.h_rw.conj() * ch.h_rc.conj())),
        willie_gain=float(ch.l_ar * np.sum(ris.beta_r * np.abs(ch.h_rw) ** 2)),
        theta_r=ris.theta_r,
        lambda_rw=float(ch.l_rw * np.sum(ris.beta_t * np.abs(ch.h_rc) ** 2)),
    )


def capacities(ch: ChannelSet, ris: StarRisState, bf: Beamformers, P_j: float):
    """Instantaneous capacities (bits/channel use) at Bob and Carol for jamming power ``P_j``."""
    cfg = ch.config
    if P_j < 0:
        raise DomainError("jamming power must be nonnegative")
    cas = cascade_vectors(ch, ris)
    sig_b = abs(cas.c_r @ bf.w_b) ** 2
    int_b = abs(cas.c_r @ bf.w_c) ** 2 + abs(cas.jam_b) ** 2 * P_j + cfg.sigma_b2
    sig_c = abs(cas.c_t @ bf.w_c) ** 2
    int_c = abs(cas.c_t @ bf.w_b) ** 2 + abs(ch.h_cc) ** 2 * P_j + cfg.sigma_c2
    return float(np.log2(1.0 + sig_b / int_b)), float(np.log2(1.0 + sig_c / int_c))
