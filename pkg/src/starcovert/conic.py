"""Small complex SDP facade plus rank-one helpers.

Problems are stated over Hermitian PSD matrix variables with trace inner
products; the backend (embedded interior point or cvxpy) is an implementation
detail behind :func:`solve_sdp`.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _ipm
from .errors import DomainError

_SENSES = ("<=", ">=", "==")


@dataclass
class _Constraint:
    terms: dict
    sense: str
    bound: float
    name: str = ""


class SdpProblem:
    """Affine objective and affine constraints over Hermitian PSD variables."""

    def __init__(self):
        self.dims: list[int] = []
        self.names: list[str] = []
        self.objective: dict = {}
        self.obj_const = 0.0
        self.sense = "max"
        self.constraints: list[_Constraint] = []

    def add_variable(self, n: int, name: str = "") -> int:
        if n < 1:
            raise DomainError("variable dimension must be positive")
        self.dims.append(int(n))
        self.names.append(name or f"X{len(self.dims) - 1}")
        return len(self.dims) - 1

    def _check_terms(self, terms: dict) -> dict:
        out = {}
        for v, A in terms.items():
            A = np.asarray(A, dtype=complex)
            n = self.dims[v]
            if A.shape != (n, n):
                raise DomainError(f"matrix for variable {v} must be {n}x{n}, got {A.shape}")
            mx = np.max(np.abs(A))
            if mx > 0 and np.max(np.abs(A - A.conj().T)) > 1e-12 * (1 + mx):
                raise DomainError("constraint and objective matrices must be Hermitian")
            out[v] = 0.5 * (A + A.conj().T)
        return out

    def set_objective(self, terms: dict, constant: float = 0.0, sense: str = "max"):
        if sense not in ("max", "min"):
            raise DomainError("sense must be 'max' or 'min'")
        self.objective = self._check_terms(terms)
        self.obj_const = float(constant)
        self.sense = sense

    def add_constraint(self, terms: dict, sense: str, bound: float, name: str = ""):
        if sense not in _SENSES:
            raise DomainError(f"constraint sense must be one of {_SENSES}")
        self.constraints.append(_Constraint(self._check_terms(terms), sense, float(bound), name))

    def pin_diagonal(self, var: int, values: Sequence[float]):
        """Constrain ``diag(X_var) == values``."""
        n = self.dims[var]
        values = np.asarray(values, dtype=float)
        if values.shape != (n,):
            raise DomainError("pinned diagonal has the wrong length")
        for i in range(n):
            E = np.zeros((n, n), dtype=complex)
            E[i, i] = 1.0
            self.add_constraint({var: E}, "==", float(values[i]), name=f"diag{var}[{i}]")

    def evaluate(self, Xs: Sequence[np.ndarray]):
        """Objective value and max constraint violation at the given matrices."""
        obj = self.obj_const + sum(np.real(np.vdot(A, Xs[v])) for v, A in self.objective.items())
        viol = 0.0
        for c in self.constraints:
            lhs = sum(np.real(np.vdot(A, Xs[v])) for v, A in c.terms.items())
            scale = 1.0 + abs(c.bound)
            if c.sense == "<=":
                viol = max(viol, (lhs - c.bound) / scale)
            elif c.sense == ">=":
                viol = max(viol, (c.bound - lhs) / scale)
            else:
                viol = max(viol, abs(lhs - c.bound) / scale)
        return float(obj), float(viol)

    def dump(self, fh) -> None:
        """Write a self-describing text dump (JSON lines of real/imag pairs, row-major)."""
        def mat(A):
            return {"n": A.shape[0], "re": np.real(A).ravel().tolist(), "im": np.imag(A).ravel().tolist()}
        fh.write(json.dumps({"kind": "header", "dims": self.dims, "names": self.names, "sense": self.sense,
                             "constant": self.obj_const}) + "\n")
        fh.write(json.dumps({"kind": "objective", "terms": {str(v): mat(A) for v, A in self.objective.items()}}) + "\n")
        for c in self.constraints:
            fh.write(json.dumps({"kind": "constraint", "name": c.name, "sense": c.sense, "bound": c.bound,
                                 "terms": {str(v): mat(A) for v, A in c.terms.items()}}) + "\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, fh) -> "SdpProblem":
        def mat(d):
            n = d["n"]
            return (np.array(d["re"]) + 1j * np.array(d["im"])).reshape(n, n)
        p = cls()
        for line in fh:
            rec = json.loads(line)
            if rec["kind"] == "header":
                for n, name in zip(rec["dims"], rec["names"]):
                    p.add_variable(n, name)
                p.sense = rec["sense"]
                p.obj_const = rec["constant"]
            elif rec["kind"] == "objective":
                p.set_objective({int(v): mat(d) for v, d in rec["terms"].items()}, p.obj_const, p.sense)
            else:
                p.add_constraint({int(v): mat(d) for v, d in rec["terms"].items()}, rec["sense"], rec["bound"], rec["name"])
        return p


@dataclass
class SdpSolution:
    X: list
    status: str  # optimal | infeasible | numeric-failure
    objective: float
    max_violation: float
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _to_standard(p: SdpProblem):
    m = len(p.constraints)
    n_ineq = sum(c.sense != "==" for c in p.constraints)
    As = [np.zeros((m, n, n), dtype=complex) for n in p.dims]
    A_lp = np.zeros((m, n_ineq))
    b = np.zeros(m)
    j = 0
    for i, c in enumerate(p.constraints):
        for v, A in c.terms.items():
            As[v][i] = A
        b[i] = c.bound
        if c.sense == "<=":
            A_lp[i, j] = 1.0
            j += 1
        elif c.sense == ">=":
            A_lp[i, j] = -1.0
            j += 1
    sgn = -1.0 if p.sense == "max" else 1.0
    C = [sgn * p.objective.get(v, np.zeros((n, n), dtype=complex)) for v, n in enumerate(p.dims)]
    return C, As, np.zeros(n_ineq), A_lp, b


def solve_sdp(p: SdpProblem, tol: float = 1e-8, backend: str = "ipm", max_iter: int = 100) -> SdpSolution:
    """Solve ``p``. Infeasibility and numerical trouble are reported through ``status``."""
    if backend == "cvxpy":
        return _solve_cvxpy(p, tol)
    if backend != "ipm":
        raise DomainError(f"unknown backend {backend!r}")
    C, As, c_lp, A_lp, b = _to_standard(p)
    res = _ipm.solve_standard(C, As, c_lp, A_lp, b, tol=tol, max_iter=max_iter)
    X = [_psd_clean(Xk) for Xk in res.X]
    obj, viol = p.evaluate(X)
    status = res.status
    if status == "dual_infeasible":
        status = "numeric-failure"
        res.info["reason"] = "objective unbounded"
    info = dict(res.info, iterations=res.iterations, y=res.y)
    return SdpSolution(X, status, obj, viol, info)


def _psd_clean(X):
    X = 0.5 * (X + X.conj().T)
    return X


def _solve_cvxpy(p: SdpProblem, tol: float) -> SdpSolution:
    import cvxpy as cp

    Xs = [cp.Variable((n, n), hermitian=True) for n in p.dims]
    cons = [X >> 0 for X in Xs]

    def lin(terms):
        return sum(cp.real(cp.trace(A.conj().T @ Xs[v])) for v, A in terms.items())

    for c in p.constraints:
        e = lin(c.terms)
        cons.append(e <= c.bound if c.sense == "<=" else e >= c.bound if c.sense == ">=" else e == c.bound)
    obj = lin(p.objective) + p.obj_const if p.objective else cp.Constant(p.obj_const)
    prob = cp.Problem(cp.Maximize(obj) if p.sense == "max" else cp.Minimize(obj), cons)
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol)
    except Exception as exc:  # solver errors become a status
        return SdpSolution([np.zeros((n, n), complex) for n in p.dims], "numeric-failure", np.nan, np.inf,
                           {"reason": str(exc)})
    if prob.status in ("infeasible", "infeasible_inaccurate"):
        return SdpSolution([np.zeros((n, n), complex) for n in p.dims], "infeasible", np.nan, np.inf, {})
    if prob.status not in ("optimal", "optimal_inaccurate"):
        return SdpSolution([np.zeros((n, n), complex) for n in p.dims], "numeric-failure", np.nan, np.inf,
                           {"reason": prob.status})
    X = [_psd_clean(np.asarray(x.value)) for x in Xs]
    o, v = p.evaluate(X)
    return SdpSolution(X, "optimal" if prob.status == "optimal" else "numeric-failure", o, v, {})


def rank_one_gap(Q: np.ndarray, psd_tol: float = 1e-8) -> float:
    """Tr(Q) - ||Q||_2: zero exactly for rank-one PSD matrices."""
    ev = np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))
    scale = max(1.0, abs(ev[-1]))
    if ev[0] < -psd_tol * scale:
        raise DomainError(f"matrix is not PSD (min eigenvalue {ev[0]:.3e})")
    return float(max(np.sum(ev[:-1]), 0.0))


def linearize_spectral_norm(Q_ref: np.ndarray):
    """Affine minorant of ||.||_2 at Q_ref: returns (q q^H, ||Q_ref||_2).

    The minorant is ``||Q_ref||_2 + Tr(q q^H (Q - Q_ref)) = Tr(q q^H Q)``. With a
    repeated top eigenvalue, the eigenvector returned first by the solver is used.
    """
    w, V = np.linalg.eigh(0.5 * (Q_ref + Q_ref.conj().T))
    q = V[:, -1]
    return np.outer(q, q.conj()), float(w[-1])


def minorant_value(qqH: np.ndarray, norm_ref: float, Q_ref: np.ndarray, Q: np.ndarray) -> float:
    return float(norm_ref + np.real(np.vdot(qqH, Q - Q_ref)))


@dataclass
class RankOneResult:
    v: Optional[np.ndarray]
    objective: float
    status: str  # ok | failed
    index: int = -1
    n_feasible: int = 0


def extract_rank_one(Q: np.ndarray, objective: Callable[[np.ndarray], float],
                     repair: Optional[Callable[[np.ndarray], Optional[np.ndarray]]] = None,
                     n_randomizations: int = 100, rng: Optional[np.random.Generator] = None) -> RankOneResult:
    """Best vector among the scaled top eigenvector and Gaussian samples shaped by Q.

    ``repair(v)`` returns a feasible (e.g. rescaled) vector or ``None``; by default
    candidates are scaled to ``Tr(Q)`` power and accepted as-is. The highest
    objective wins; ties go to the lowest candidate index.
    """
    Q = 0.5 * (Q + Q.conj().T)
    w, V = np.linalg.eigh(Q)
    w = np.clip(w, 0.0, None)
    tr = float(np.sum(w))
    cands = [V[:, -1] * np.sqrt(tr)]
    if n_randomizations > 0:
        rng = rng or np.random.default_rng(0)
        n = Q.shape[0]
        z = (rng.standard_normal((n_randomizations, n)) + 1j * rng.standard_normal((n_randomizations, n))) / np.sqrt(2)
        S = (V * np.sqrt(w)) @ z.T  # columns are samples with covariance Q
        cands.extend(S.T)
    best = RankOneResult(None, -np.inf, "failed")
    nfeas = 0
    for i, v in enumerate(cands):
        u = repair(v) if repair is not None else v
        if u is None:
            continue
        nfeas += 1
        f = float(objective(u))
        if f > best.objective:
            best = RankOneResult(np.asarray(u), f, "ok", i)
    best.n_feasible = nfeas
    return best
