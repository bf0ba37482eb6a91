"""Alternating optimization of the covert rate: two active SDR subproblems and a penalized Dinkelbach passive step.

Internally every received power is normalized by the receiver noise so the
SDPs are well scaled; rates and constraint checks always use physical units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import optimize as sopt

from .conic import SdpProblem, extract_rank_one, linearize_spectral_norm, rank_one_gap, solve_sdp
from .detection import covert_lhs
from .errors import DomainError, InfeasibleInitError
from .model import Beamformers, ChannelSet, StarRisState, SystemConfig, diag_cascades, substream
from .outage import solve_sigma_star


@dataclass(frozen=True)
class Tolerances:
    eps_outer: float = 1e-4
    eps_penalty: float = 1e-8
    eps_dinkelbach: float = 1e-8
    omega: float = 10.0
    rho_init: float = 1e-3
    max_outer: int = 50
    max_penalty: int = 12
    max_inner: int = 30
    n_randomizations: int = 100
    sdp_tol: float = 1e-8
    feas_tol: float = 1e-7
    init_attempts: int = 20

    def __post_init__(self):
        if self.omega <= 1:
            raise DomainError("omega must exceed 1")
        for name in ("eps_outer", "eps_penalty", "eps_dinkelbach", "rho_init", "sdp_tol", "feas_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# scalar pieces of the covert constraint


def _g(varpi_b, varpi_c, K):
    s = varpi_b + varpi_c
    if varpi_b <= 0:
        return 0.0
    return varpi_b * math.log1p(K / s)


def _g_prime(varpi_b, varpi_c, K):
    s = varpi_b + varpi_c
    return math.log1p(K / s) - varpi_b * K / (s * (s + K))


def taylor_g(varpi_b: float, varpi_b_ref: float, varpi_c: float, gain_theta: float, p_lambda_rw: float) -> float:
    """First-order expansion at ``varpi_b_ref`` of ``g(w) = w ln(1 + P lambda_rw / (gain_theta (w + varpi_c)))``.

    ``g`` is concave, so the expansion majorizes it.
    """
    if not varpi_b_ref > 0:
        raise DomainError("reference point must be positive")
    K = p_lambda_rw / gain_theta
    return _g(varpi_b_ref, varpi_c, K) + _g_prime(varpi_b_ref, varpi_c, K) * (varpi_b - varpi_b_ref)


def g_value(varpi_b, varpi_c, gain_theta, p_lambda_rw):
    return _g(varpi_b, varpi_c, p_lambda_rw / gain_theta)


def covert_power_cap(epsilon: float, varpi_b: float, gain_theta: float, p_lambda_rw: float) -> float:
    """Public-stream power at which the covert constraint is tight, for covert power ``varpi_b``.

    The detection side decreases as the public power grows, so the feasible
    public powers are those at or above this value.
    """
    if not varpi_b > 0:
        raise DomainError("varpi_b must be positive")
    K = p_lambda_rw / gain_theta
    a = epsilon * K / varpi_b
    if a > 700:
        return -varpi_b
    return K / math.expm1(a) - varpi_b


def covert_covert_cap(epsilon: float, varpi_c: float, gain_theta: float, p_lambda_rw: float, hi: float) -> float:
    """Largest covert power in [0, hi] meeting the covert constraint at public power ``varpi_c``."""
    if gain_theta <= 0:
        return hi
    K = p_lambda_rw / gain_theta
    target = epsilon * K
    if _g(hi, varpi_c, K) <= target:
        return hi
    return sopt.brentq(lambda w: _g(w, varpi_c, K) - target, 0.0, hi, xtol=1e-15 * max(hi, 1e-300), rtol=1e-13)


def phi_epsilon(epsilon: float, varpi_b: float, varpi_c: float, gain: float, P_j_max: float, rtol: float = 1e-12) -> float:
    """Threshold on r = lambda_rw / theta_r such that the covert constraint holds iff r >= threshold.

    ``gain`` is the per-unit-theta mean reflected power gain toward the warden.
    """
    if not varpi_b > 0:
        raise DomainError("varpi_b must be positive")
    s = varpi_b + varpi_c
    target = epsilon * s / varpi_b  # ln(1+u)/u must drop to this value
    if target >= 1.0:
        return 0.0

    def h(u):
        return math.log1p(u) / u - target

    lo, hi = 1e-12, 1.0
    while h(hi) > 0:
        lo, hi = hi, hi * 2.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    return u * gain * s / P_j_max


# ---------------------------------------------------------------------------
# per-realization context


@dataclass
class Layout:
    """Which elements may reflect or transmit.

    STAR-RIS: every element does both with free split. Conventional pair: the
    first half only reflects and the second half only transmits.
    """
    star: bool
    r_idx: np.ndarray
    t_idx: np.ndarray

    @classmethod
    def star_ris(cls, N: int) -> "Layout":
        idx = np.arange(N)
        return cls(True, idx, idx)

    @classmethod
    def conventional(cls, N: int) -> "Layout":
        if N % 2:
            raise DomainError("the conventional two-surface baseline needs an even element count")
        return cls(False, np.arange(N // 2), np.arange(N // 2, N))

    def beta_r(self, N: int) -> Optional[np.ndarray]:
        if self.star:
            return None
        b = np.zeros(N)
        b[self.r_idx] = 1.0
        return b


class Context:
    """Channel-dependent constants shared by all subproblems of one run."""

    def __init__(self, ch: ChannelSet, cfg: Optional[SystemConfig] = None, layout: Optional[Layout] = None):
        self.ch = ch
        self.cfg = cfg or ch.config
        self.N, self.M = self.cfg.N, self.cfg.M
        self.layout = layout or Layout.star_ris(self.N)
        self.Hb, self.Hc, self.e_b = diag_cascades(ch)
        self.a_rw = ch.l_rw * np.abs(ch.h_rc) ** 2  # lambda_rw = beta_t . a_rw
        self.gain = ch.l_ar * ch.l_rw
        self.sigma_star = solve_sigma_star(self.cfg.kappa, self.cfg.phi_sic, self.cfg.P_j_max)
        self.s_R = 2.0 ** self.cfg.R_star - 1.0

    # physical quantities -------------------------------------------------
    def powers(self, ris: StarRisState, bf: Beamformers):
        vr, vt = ris.vartheta_r, ris.vartheta_t
        c_r = vr @ self.Hb
        c_t = vt @ self.Hc
        jam = abs(vt @ self.e_b) ** 2
        return c_r, c_t, jam

    def evaluate(self, ris: StarRisState, bf: Beamformers) -> "Evaluation":
        cfg = self.cfg
        c_r, c_t, jam = self.powers(ris, bf)
        sig_b = abs(c_r @ bf.w_b) ** 2
        int_b = abs(c_r @ bf.w_c) ** 2
        sig_c = abs(c_t @ bf.w_c) ** 2
        int_c = abs(c_t @ bf.w_b) ** 2
        r_bb = math.log2(1.0 + sig_b / (int_b + jam * cfg.P_j_max * (1.0 - cfg.iota) + cfg.sigma_b2))
        r_cc = math.log2(1.0 + sig_c / (int_c + self.sigma_star + cfg.sigma_c2))
        theta = ris.theta_r
        lam_rw = float(ris.beta_t @ self.a_rw)
        gt = self.gain * theta
        if bf.varpi_b <= 0 or gt <= 0:
            lhs = 0.0
        elif lam_rw <= 0:
            lhs = 1.0
        else:
            lhs = covert_lhs(gt, bf.varpi_b, bf.varpi_c, cfg.P_j_max * lam_rw)
        power = bf.varpi_b + bf.varpi_c
        return Evaluation(r_bb, r_cc, lhs, power, theta, lam_rw)

    def feasible(self, ev: "Evaluation", tol: float) -> bool:
        cfg = self.cfg
        return (ev.power <= cfg.P_max * (1 + 1e-12) + 1e-12 and ev.covert_lhs <= cfg.epsilon + tol
                and ev.R_cc >= cfg.R_star - tol)

    def K(self, ris: StarRisState) -> float:
        """P_j_max lambda_rw / (gain theta_r)."""
        theta = ris.theta_r
        if theta <= 0:
            return math.inf
        return self.cfg.P_j_max * float(ris.beta_t @ self.a_rw) / (self.gain * theta)


@dataclass(frozen=True)
class Evaluation:
    R_bb: float
    R_cc: float
    covert_lhs: float
    power: float
    theta_r: float
    lambda_rw: float

    @property
    def dep_lower_bound(self) -> float:
        return 1.0 - self.covert_lhs


@dataclass
class OptimizerState:
    bf: Beamformers
    ris: StarRisState
    W_b: Optional[np.ndarray] = None
    W_c: Optional[np.ndarray] = None
    Q_r: Optional[np.ndarray] = None
    Q_t: Optional[np.ndarray] = None
    chi: float = 0.0
    rho: tuple = (0.0, 0.0)
    iterations: int = 0
    trace: list = field(default_factory=list)
    eta: tuple = (0.0, 0.0)


@dataclass
class StepResult:
    status: str  # accepted | rejected | infeasible | solver-failure
    value: object = None
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# active subproblems


def solve_wb_subproblem(state: OptimizerState, ctx: Context, tol: Tolerances = Tolerances(),
                        rng: Optional[np.random.Generator] = None) -> StepResult:
    """Covert beamformer update with the linearized covert constraint; returns the new ``w_b``."""
    cfg = ctx.cfg
    bf, ris = state.bf, state.ris
    c_r, c_t, _ = ctx.powers(ris, bf)
    budget = cfg.P_max - bf.varpi_c
    f = abs(c_t @ bf.w_c) ** 2 / ctx.s_R - ctx.sigma_star - cfg.sigma_c2 if ctx.s_R > 0 else math.inf
    if budget <= 0 or f < 0:
        return StepResult("infeasible", None, {"budget": budget, "f": f})
    nb, nc = cfg.sigma_b2, cfg.sigma_c2
    A = np.outer(c_r.conj(), c_r) / nb
    B = np.outer(c_t.conj(), c_t) / nc
    gt = ctx.gain * ris.theta_r
    lam_rw = float(ris.beta_t @ ctx.a_rw)
    p = SdpProblem()
    W = p.add_variable(cfg.M, "W_b")
    p.set_objective({W: A}, sense="max")
    I = np.eye(cfg.M)
    p.add_constraint({W: I}, "<=", budget, "power")
    covert_active = gt > 0 and lam_rw > 0
    cap_exact = budget
    if covert_active:
        K = cfg.P_j_max * lam_rw / gt
        ref = max(bf.varpi_b, 1e-8)
        slope = _g_prime(ref, bf.varpi_c, K)
        rhs = cfg.epsilon * K - _g(ref, bf.varpi_c, K) + slope * ref
        p.add_constraint({W: slope * I}, "<=", rhs, "covert")
        cap_exact = covert_covert_cap(cfg.epsilon, bf.varpi_c, gt, cfg.P_j_max * lam_rw, budget)
    if math.isfinite(f):
        p.add_constraint({W: B}, "<=", f / nc, "qos")
    sol = solve_sdp(p, tol=tol.sdp_tol)
    if sol.status == "infeasible":
        return StepResult("infeasible", None, {"sdp": sol.status})
    if sol.status != "optimal" and sol.max_violation > 1e-6:
        return StepResult("solver-failure", None, {"sdp": sol.status, "info": sol.info})

    a_vec = c_r
    b_vec = c_t

    def repair(v):
        nv = float(np.real(np.vdot(v, v)))
        if nv <= 0:
            return None
        s = min(budget, cap_exact) / nv
        lk = abs(b_vec @ v) ** 2
        if math.isfinite(f) and lk > 0:
            s = min(s, f / lk)
        if s <= 0:
            return None
        return math.sqrt(s) * v

    ex = extract_rank_one(sol.X[0], lambda v: abs(a_vec @ v) ** 2, repair, tol.n_randomizations,
                          rng or np.random.default_rng(0))
    if ex.status != "ok":
        return StepResult("rejected", None, {"reason": "no feasible candidate"})
    return StepResult("accepted", ex.v, {"sdp_objective": sol.objective * nb, "W": sol.X[0], "candidate": ex.index})


def solve_wc_subproblem(state: OptimizerState, ctx: Context, tol: Tolerances = Tolerances(),
                        rng: Optional[np.random.Generator] = None) -> StepResult:
    """Public beamformer update: least leakage toward the covert user under QoS and covert floors."""
    cfg = ctx.cfg
    bf, ris = state.bf, state.ris
    c_r, c_t, _ = ctx.powers(ris, bf)
    budget = cfg.P_max - bf.varpi_b
    f_hat = ctx.s_R * (abs(c_t @ bf.w_b) ** 2 + ctx.sigma_star + cfg.sigma_c2)
    gt = ctx.gain * ris.theta_r
    lam_rw = float(ris.beta_t @ ctx.a_rw)
    if bf.varpi_b > 0 and gt > 0 and lam_rw > 0:
        floor = covert_power_cap(cfg.epsilon, bf.varpi_b, gt, cfg.P_j_max * lam_rw)
    else:
        floor = -math.inf
    lmax_b = float(np.real(np.vdot(c_t, c_t)))
    need = max(floor, f_hat / lmax_b if lmax_b > 0 else (math.inf if f_hat > 0 else 0.0))
    if need > budget:
        return StepResult("infeasible", None, {"floor": floor, "qos_power": f_hat / lmax_b if lmax_b else math.inf,
                                               "budget": budget})
    nb, nc = cfg.sigma_b2, cfg.sigma_c2
    A = np.outer(c_r.conj(), c_r) / nb
    B = np.outer(c_t.conj(), c_t) / nc
    p = SdpProblem()
    W = p.add_variable(cfg.M, "W_c")
    p.set_objective({W: A}, sense="min")
    I = np.eye(cfg.M)
    p.add_constraint({W: I}, "<=", budget, "power")
    if floor > 0:
        p.add_constraint({W: I}, ">=", floor, "covert")
    if f_hat > 0:
        p.add_constraint({W: B}, ">=", f_hat / nc, "qos")
    sol = solve_sdp(p, tol=tol.sdp_tol)
    if sol.status == "infeasible":
        return StepResult("infeasible", None, {"sdp": sol.status})
    if sol.status != "optimal" and sol.max_violation > 1e-6:
        return StepResult("solver-failure", None, {"sdp": sol.status, "info": sol.info})

    def repair(v):
        nv = float(np.real(np.vdot(v, v)))
        if nv <= 0:
            return None
        lo = max(floor, 0.0) / nv
        lk = abs(c_t @ v) ** 2
        if f_hat > 0:
            if lk <= 0:
                return None
            lo = max(lo, f_hat / lk)
        hi = budget / nv
        if lo > hi:
            return None
        return math.sqrt(lo) * v if lo > 0 else 0.0 * v

    ex = extract_rank_one(sol.X[0], lambda v: -abs(c_r @ v) ** 2, repair, tol.n_randomizations,
                          rng or np.random.default_rng(1))
    if ex.status != "ok":
        return StepResult("rejected", None, {"reason": "no feasible candidate"})
    return StepResult("accepted", ex.v, {"sdp_objective": sol.objective * nb, "W": sol.X[0], "candidate": ex.index})


# ---------------------------------------------------------------------------
# passive subproblem


@dataclass
class PassiveData:
    """Noise-normalized matrices of the passive subproblem restricted to the active element sets."""
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    a_rw: np.ndarray
    jam_scale: float
    qos_const: float
    phi: float

    def numerator(self, Q_r):
        return float(np.real(np.vdot(self.C, Q_r)))

    def denominator(self, Q_r, Q_t):
        return float(np.real(np.vdot(self.D, Q_r)) + self.jam_scale * np.real(np.vdot(self.E, Q_t)) + 1.0)


def passive_data(ctx: Context, bf: Beamformers) -> PassiveData:
    cfg = ctx.cfg
    r, t = ctx.layout.r_idx, ctx.layout.t_idx
    nb, nc = cfg.sigma_b2, cfg.sigma_c2
    c = (ctx.Hb @ bf.w_b)[r]
    d = (ctx.Hb @ bf.w_c)[r]
    e = ctx.e_b[t]
    f = (ctx.Hc @ bf.w_c)[t]
    g = (ctx.Hc @ bf.w_b)[t]
    if bf.varpi_b > 0:
        phi = phi_epsilon(cfg.epsilon, bf.varpi_b, bf.varpi_c, ctx.gain, cfg.P_j_max)
    else:
        phi = 0.0
    return PassiveData(
        C=np.outer(c, c.conj()) / nb,
        D=np.outer(d, d.conj()) / nb,
        E=np.outer(e, e.conj()) / nb,
        F=np.outer(f, f.conj()) / nc,
        G=np.outer(g, g.conj()) / nc,
        a_rw=ctx.a_rw,
        jam_scale=cfg.P_j_max * (1.0 - cfg.iota),
        qos_const=(ctx.sigma_star + cfg.sigma_c2) / nc,
        phi=phi,
    )


def _lift(ris: StarRisState, layout: Layout):
    vr = ris.vartheta_r[layout.r_idx]
    vt = ris.vartheta_t[layout.t_idx]
    return np.outer(vr.conj(), vr), np.outer(vt.conj(), vt)


def _penalized_quotient(pd: PassiveData, Q_r, Q_t, rho):
    eta_r = _eta(Q_r)
    eta_t = _eta(Q_t)
    return (pd.numerator(Q_r) - rho * (eta_r + eta_t)) / pd.denominator(Q_r, Q_t), eta_r, eta_t


def _eta(Q):
    ev = np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))
    return float(max(np.sum(ev[:-1]), 0.0))


def passive_inner_step(Q_r, Q_t, chi: float, rho: float, pd: PassiveData, ctx: Context, tol: Tolerances):
    """One Dinkelbach step: solve the linearized penalized SDP at (Q_r, Q_t) and update chi.

    Returns (status, Q_r, Q_t, chi, F_opt). ``chi`` is the penalized quotient at
    the new point; it never decreases because the transformed objective is
    zero at the incumbent and the rank-gap linearization majorizes the gap.
    """
    cfg = ctx.cfg
    lay = ctx.layout
    nr, nt = len(lay.r_idx), len(lay.t_idx)
    qr, _ = linearize_spectral_norm(Q_r)
    qt, _ = linearize_spectral_norm(Q_t)
    p = SdpProblem()
    vr = p.add_variable(nr, "Q_r")
    vt = p.add_variable(nt, "Q_t")
    obj_r = pd.C - chi * pd.D - rho * (np.eye(nr) - qr)
    obj_t = -chi * pd.jam_scale * pd.E - rho * (np.eye(nt) - qt)
    p.set_objective({vr: obj_r, vt: obj_t}, constant=-chi, sense="max")
    if lay.star:
        for i in range(nr):
            Ei = np.zeros((nr, nr), dtype=complex)
            Ei[i, i] = 1.0
            p.add_constraint({vr: Ei, vt: Ei}, "==", 1.0, f"split[{i}]")
        if pd.phi > 0:
            scale = 1.0 / max(np.max(pd.a_rw), pd.phi)
            p.add_constraint({vt: np.diag(pd.a_rw[lay.t_idx] * scale), vr: -pd.phi * scale * np.eye(nr)}, ">=", 0.0,
                             "covert")
    else:
        p.pin_diagonal(vr, np.ones(nr))
        p.pin_diagonal(vt, np.ones(nt))
    if ctx.s_R > 0:
        p.add_constraint({vt: pd.F - ctx.s_R * pd.G}, ">=", ctx.s_R * pd.qos_const, "qos")
    sol = solve_sdp(p, tol=tol.sdp_tol)
    if sol.status == "infeasible":
        return "infeasible", Q_r, Q_t, chi, 0.0
    if sol.status != "optimal" and sol.max_violation > 1e-6:
        return "solver-failure", Q_r, Q_t, chi, 0.0
    Qr_new, Qt_new = sol.X
    chi_new, _, _ = _penalized_quotient(pd, Qr_new, Qt_new, rho)
    return "ok", Qr_new, Qt_new, chi_new, sol.objective


@dataclass
class PassiveResult:
    ris: Optional[StarRisState]
    Q_r: np.ndarray
    Q_t: np.ndarray
    converged: bool
    eta: tuple
    chi_trace: list
    v1_trace: list
    n_sdp: int
    status: str


def _recover(Q_r, Q_t, layout: Layout, N: int, use_diag: bool):
    w, V = np.linalg.eigh(0.5 * (Q_r + Q_r.conj().T))
    vr = np.sqrt(max(w[-1], 0.0)) * V[:, -1].conj()
    w2, V2 = np.linalg.eigh(0.5 * (Q_t + Q_t.conj().T))
    vt = np.sqrt(max(w2[-1], 0.0)) * V2[:, -1].conj()
    phi_r = np.zeros(N)
    phi_t = np.zeros(N)
    if layout.star:
        amp = np.clip(np.real(np.diag(Q_r)) if use_diag else np.abs(vr) ** 2, 0.0, 1.0)
        beta_r = amp
        phi_r[:] = np.angle(vr)
        phi_t[:] = np.angle(vt)
    else:
        beta_r = layout.beta_r(N)
        phi_r[layout.r_idx] = np.angle(vr)
        phi_t[layout.t_idx] = np.angle(vt)
    return StarRisState(beta_r=beta_r, phi_r=phi_r, phi_t=phi_t)


def algorithm1_passive(state: OptimizerState, ctx: Context, tol: Tolerances = Tolerances()) -> PassiveResult:
    """Penalty (outer) plus Dinkelbach (inner) loop for the STAR-RIS coefficients at fixed beamformers."""
    bf = state.bf
    pd = passive_data(ctx, bf)
    Q_r, Q_t = _lift(state.ris, ctx.layout)
    rho = tol.rho_init * max(float(np.linalg.eigvalsh(pd.C)[-1]), 1e-12)
    chi_trace, v1_trace = [], []
    n_sdp = 0
    converged = False
    status = "ok"
    eta_r, eta_t = _eta(Q_r), _eta(Q_t)
    # interior-point solutions carry eigenvalue fuzz of order n * sdp_tol; a smaller gap is not resolvable
    floor = max(tol.eps_penalty, max(Q_r.shape[0], Q_t.shape[0]) * tol.sdp_tol)
    for outer in range(tol.max_penalty):
        chi, eta_r, eta_t = _penalized_quotient(pd, Q_r, Q_t, rho)
        chi_trace.append([chi])
        for inner in range(tol.max_inner):
            st, Qr_new, Qt_new, chi_new, F = passive_inner_step(Q_r, Q_t, chi, rho, pd, ctx, tol)
            n_sdp += 1
            if st != "ok":
                status = st
                break
            if chi_new < chi:
                # solver noise only; keep the incumbent
                break
            v2 = (chi_new - chi) / max(1.0, abs(chi))
            Q_r, Q_t, chi = Qr_new, Qt_new, chi_new
            chi_trace[-1].append(chi)
            if v2 <= tol.eps_dinkelbach:
                break
        if status != "ok":
            break
        eta_r, eta_t = _eta(Q_r), _eta(Q_t)
        v1 = max(eta_r, eta_t)
        v1_trace.append(v1)
        if v1 <= floor:
            converged = True
            break
        rho *= tol.omega
    ris = None
    if status == "ok" or n_sdp > 1:
        ris = _best_recovery(Q_r, Q_t, state, ctx, tol)
    return PassiveResult(ris, Q_r, Q_t, converged, (eta_r, eta_t), chi_trace, v1_trace, n_sdp, status)


def _best_recovery(Q_r, Q_t, state, ctx, tol):
    best, best_r = None, -math.inf
    for use_diag in (False, True):
        ris = _recover(Q_r, Q_t, ctx.layout, ctx.N, use_diag)
        ev = ctx.evaluate(ris, state.bf)
        if ctx.feasible(ev, tol.feas_tol) and ev.R_bb > best_r:
            best, best_r = ris, ev.R_bb
    return best


# ---------------------------------------------------------------------------
# initialization and outer loop


def _dominant_right(H):
    _, _, Vh = np.linalg.svd(H, full_matrices=False)
    return Vh[0].conj()


def _phase_candidates(ctx: Context, seed: int):
    N = ctx.N
    lay = ctx.layout
    beta = np.full(N, 0.5) if lay.star else lay.beta_r(N)
    yield "random", StarRisState(beta_r=beta, phi_r=substream(seed, 7, 0).uniform(0, 2 * np.pi, N),
                                 phi_t=substream(seed, 7, 1).uniform(0, 2 * np.pi, N))
    ub = _dominant_right(ctx.Hb)
    uc = _dominant_right(ctx.Hc)
    yield "aligned", StarRisState(beta_r=beta, phi_r=-np.angle(ctx.Hb @ ub), phi_t=-np.angle(ctx.Hc @ uc))
    for k in range(2, ctx_attempts(ctx)):
        yield "random", StarRisState(beta_r=beta, phi_r=substream(seed, 7, 2 * k).uniform(0, 2 * np.pi, N),
                                     phi_t=substream(seed, 7, 2 * k + 1).uniform(0, 2 * np.pi, N))


def ctx_attempts(ctx):
    return getattr(ctx, "init_attempts", 20)


_PC_FRACTIONS = (1 / 3, 1 / 2, 2 / 3, 0.8, 0.9, 1.0)


def _init_powers(ctx: Context, ris: StarRisState, tol: Tolerances):
    """Best feasible (w_b, w_c) on a grid of public-power fractions, covert power maximized by bisection."""
    cfg = ctx.cfg
    c_r = ris.vartheta_r @ ctx.Hb
    c_t = ris.vartheta_t @ ctx.Hc
    nct = np.linalg.norm(c_t)
    if nct == 0:
        return None
    u_c = c_t.conj() / nct
    proj = c_r.conj() - u_c * np.vdot(u_c, c_r.conj())
    if np.linalg.norm(proj) < 1e-9 * max(np.linalg.norm(c_r), 1e-300):
        proj = c_r.conj()
    if np.linalg.norm(proj) == 0:
        proj = np.ones(cfg.M, dtype=complex)
    u_b = proj / np.linalg.norm(proj)
    best = None
    for frac in _PC_FRACTIONS:
        pc = frac * cfg.P_max
        w_c = math.sqrt(pc) * u_c

        def ok(pb):
            bf = Beamformers(math.sqrt(pb) * u_b, w_c)
            ev = ctx.evaluate(ris, bf)
            return ctx.feasible(ev, 0.0), ev

        f0, ev0 = ok(0.0)
        if not f0:
            continue
        hi = cfg.P_max - pc
        if hi <= 0:
            cand = (0.0, ev0)
        else:
            fh, evh = ok(hi)
            if fh:
                cand = (hi, evh)
            else:
                lo = 0.0
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if ok(mid)[0]:
                        lo = mid
                    else:
                        hi = mid
                cand = (lo, ok(lo)[1])
        if best is None or cand[1].R_bb > best[2].R_bb:
            best = (Beamformers(math.sqrt(cand[0]) * u_b, w_c), ris, cand[1])
    return best


def initialize(ctx: Context, tol: Tolerances = Tolerances(), seed: Optional[int] = None):
    """Feasible starting point: phases (random, then aligned, then fresh random draws) and a power grid.

    A start with zero covert rate is a fixed point of the alternating loop (the
    public beamformer holds the whole budget), so it is kept only as a fallback
    while later phase candidates are tried.
    """
    seed = ctx.ch.seed if seed is None else seed
    ctx.init_attempts = tol.init_attempts
    tried = []
    fallback = None
    for kind, ris in _phase_candidates(ctx, seed):
        got = _init_powers(ctx, ris, tol)
        tried.append(kind)
        if got is not None:
            bf, ris, ev = got
            if ev.R_bb > 0:
                return OptimizerState(bf=bf, ris=ris), ev, kind
            fallback = fallback or (OptimizerState(bf=bf, ris=ris), ev, kind)
    if fallback is not None:
        return fallback
    raise InfeasibleInitError("no feasible starting point", {"attempts": tried})


@dataclass
class OptimizeResult:
    bf: Beamformers
    ris: StarRisState
    R_bb: float
    evaluation: Evaluation
    converged: bool
    iterations: int
    trace: list
    records: list
    checks: dict
    eta: tuple
    init_kind: str


def _accept(ctx, state, ev_cur, ris=None, bf=None, tol=None):
    ris = ris or state.ris
    bf = bf or state.bf
    ev = ctx.evaluate(ris, bf)
    if ctx.feasible(ev, tol.feas_tol) and ev.R_bb >= ev_cur.R_bb:
        return True, ev
    return False, ev_cur


def algorithm2_alternating(config: SystemConfig, ch: ChannelSet, tol: Tolerances = Tolerances(),
                           layout: Optional[Layout] = None, seed: Optional[int] = None) -> OptimizeResult:
    """Alternate covert-beamformer, public-beamformer and STAR-RIS updates until the rate stalls."""
    ctx = Context(ch, config, layout)
    state, ev, init_kind = initialize(ctx, tol, seed)
    rng = substream(ch.seed if seed is None else seed, 11)
    trace = [ev.R_bb]
    records = []
    converged = False
    eta = (0.0, 0.0)
    it = 0
    for it in range(1, tol.max_outer + 1):
        prev = ev.R_bb
        info = {"iteration": it}
        res = solve_wb_subproblem(state, ctx, tol, rng)
        if res.status == "accepted":
            bf_new = Beamformers(res.value, state.bf.w_c)
            acc, ev = _accept(ctx, state, ev, bf=bf_new, tol=tol)
            if acc:
                state.bf = bf_new
                state.W_b = res.info["W"]
        info["wb"] = res.status
        res = solve_wc_subproblem(state, ctx, tol, rng)
        if res.status == "accepted":
            bf_new = Beamformers(state.bf.w_b, res.value)
            acc, ev = _accept(ctx, state, ev, bf=bf_new, tol=tol)
            if acc:
                state.bf = bf_new
                state.W_c = res.info["W"]
        info["wc"] = res.status
        pr = algorithm1_passive(state, ctx, tol)
        state.Q_r, state.Q_t = pr.Q_r, pr.Q_t
        eta = pr.eta
        if pr.ris is not None:
            acc, ev = _accept(ctx, state, ev, ris=pr.ris, tol=tol)
            if acc:
                state.ris = pr.ris
        info.update(passive=pr.status, passive_converged=pr.converged, n_sdp=pr.n_sdp,
                    chi=pr.chi_trace[-1][-1] if pr.chi_trace else float("nan"),
                    v1=pr.v1_trace[-1] if pr.v1_trace else float("nan"), R_bb=ev.R_bb)
        trace.append(ev.R_bb)
        v = (ev.R_bb - prev) ** 2
        info["v"] = v
        records.append(info)
        if v <= tol.eps_outer:
            converged = True
            break
    state.trace = trace
    checks = exit_checks(ctx, state.ris, state.bf, eta)
    return OptimizeResult(state.bf, state.ris, ev.R_bb, ev, converged, it, trace, records, checks, eta, init_kind)


def exit_checks(ctx: Context, ris: StarRisState, bf: Beamformers, eta=(0.0, 0.0)) -> dict:
    cfg = ctx.cfg
    ev = ctx.evaluate(ris, bf)
    return {
        "power": ev.power <= cfg.P_max + 1e-8,
        "covert": ev.dep_lower_bound >= 1.0 - cfg.epsilon - 1e-6,
        "qos": ev.R_cc >= cfg.R_star - 1e-6,
        "beta_sum": float(np.max(np.abs(ris.beta_r + ris.beta_t - 1.0))) <= 1e-8,
        "phases": bool(np.all((ris.phi_r >= 0) & (ris.phi_r < 2 * np.pi) & (ris.phi_t >= 0) & (ris.phi_t < 2 * np.pi))),
        "rank_one": max(eta) <= 1e-6,
    }
