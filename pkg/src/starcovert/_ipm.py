"""Primal-dual interior-point method for small complex semidefinite programs.

Standard form::

    min  sum_k <C_k, X_k> + c_lp . x
    s.t. sum_k <A_ik, X_k> + A_lp[i] . x = b_i
         X_k Hermitian PSD, x >= 0

with ``<A, X> = Re tr(A^H X)``. The search direction is HKM with Mehrotra's
predictor-corrector. Constraint matrices that are diagonal in a block (element
splits, pinned diagonals, trace rows) are kept as coefficient vectors, so the
Schur complement costs one Hadamard product per block plus two matrix products
per genuinely dense constraint.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve


@dataclass
class IpmResult:
    status: str  # optimal | infeasible | dual_infeasible | numeric-failure
    X: list
    x: np.ndarray
    y: np.ndarray
    Z: list
    z: np.ndarray
    pobj: float
    dobj: float
    iterations: int
    info: dict = field(default_factory=dict)


def _herm(M):
    return 0.5 * (M + M.conj().T)


def _chol(A):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None


def _batched(fn, mats):
    """Apply a numpy.linalg routine to a list of matrices in one call when shapes agree."""
    if len({m.shape for m in mats}) == 1:
        return list(fn(np.stack(mats)))
    return [fn(m) for m in mats]


def _chol_all(mats):
    try:
        return _batched(np.linalg.cholesky, mats)
    except np.linalg.LinAlgError:
        return [_chol(m) for m in mats]


def _max_steps(Lis, dXs):
    """Largest alphas with X + alpha dX PSD, given inverse Cholesky factors of each X."""
    S = [_herm(Li @ dX @ Li.conj().T) for Li, dX in zip(Lis, dXs)]
    lmins = [ev[0] for ev in _batched(np.linalg.eigvalsh, S)]
    return [np.inf if lm >= 0 else -1.0 / lm for lm in lmins]


def _max_step_lp(v, dv, p):
    """Largest steps keeping the first p and the last p entries of v + alpha dv nonnegative."""
    with np.errstate(divide="ignore"):
        r = np.where(dv < 0, -v / np.where(dv < 0, dv, -1.0), np.inf)
    return float(np.min(r[:p])), float(np.min(r[p:]))


class _Block:
    """Constraint data of one PSD block split into diagonal rows and dense rows."""

    def __init__(self, A: np.ndarray, C: np.ndarray):
        m, n, _ = A.shape
        self.n = n
        self.C = C
        diag = np.real(np.einsum("mii->mi", A))
        off = A.copy()
        idx = np.arange(n)
        off[:, idx, idx] = 0.0
        dense = np.flatnonzero(np.any(off != 0, axis=(1, 2)))
        self.D = diag.copy()
        self.D[dense] = 0.0
        self.dense = [(int(i), A[i].copy()) for i in dense]
        self.sqnorm = np.sum(self.D ** 2, axis=1)
        for i, Ai in self.dense:
            self.sqnorm[i] = np.sum(np.abs(Ai) ** 2)

    def scale_rows(self, r):
        self.D = self.D / r[:, None]
        self.dense = [(i, Ai / r[i]) for i, Ai in self.dense]

    def apply(self, X):
        out = self.D @ np.real(np.diagonal(X))
        for i, Ai in self.dense:
            out[i] += np.real(np.vdot(Ai, X))
        return out

    def adjoint(self, y):
        S = np.diag((self.D.T @ y).astype(complex))
        for i, Ai in self.dense:
            S = S + y[i] * Ai
        return S

    def schur(self, X, Zi, M):
        M += self.D @ np.real(X * Zi.T) @ self.D.T
        for j, Aj in self.dense:
            P = X @ Aj @ Zi
            col = self.D @ np.real(np.diagonal(P))
            for i, Ai in self.dense:
                col[i] += np.real(np.vdot(Ai, P))
            M[:, j] += col
            M[j, :] += col
            M[j, j] -= col[j]


def solve_standard(C, As, c_lp, A_lp, b, tol=1e-8, max_iter=100, step=0.98):
    """Solve the standard-form problem; see module docstring for shapes."""
    m = b.size
    p = c_lp.size
    blocks = [_Block(np.asarray(A, dtype=complex), np.asarray(c, dtype=complex)) for c, A in zip(C, As)]
    nb = len(blocks)
    ntot = sum(bk.n for bk in blocks) + p
    A_lp = A_lp if p else np.zeros((m, 0))

    # row and objective scaling
    rn = sum(bk.sqnorm for bk in blocks) + np.sum(A_lp ** 2, axis=1)
    rn = np.sqrt(rn)
    rn[rn == 0] = 1.0
    for bk in blocks:
        bk.scale_rows(rn)
    A_lp = A_lp / rn[:, None]
    b = b / rn
    cs = max(np.sqrt(sum(np.sum(np.abs(bk.C) ** 2) for bk in blocks) + np.sum(c_lp ** 2)), 1e-300)
    bs = max(np.linalg.norm(b), 1e-300)
    for bk in blocks:
        bk.C = bk.C / cs
    c_lp = c_lp / cs
    b = b / bs
    bnorm = np.linalg.norm(b)

    xi = max(10.0, np.sqrt(ntot), ntot * np.max(1.0 + np.abs(b)) / 2.0)
    zeta = max(10.0, np.sqrt(ntot))
    X = [xi * np.eye(bk.n, dtype=complex) for bk in blocks]
    Z = [zeta * np.eye(bk.n, dtype=complex) for bk in blocks]
    LX = [np.sqrt(xi) * np.eye(bk.n, dtype=complex) for bk in blocks]
    LZ = [np.sqrt(zeta) * np.eye(bk.n, dtype=complex) for bk in blocks]
    x = np.full(p, xi)
    z = np.full(p, zeta)
    y = np.zeros(m)

    status = "numeric-failure"
    info = {}
    it = 0
    best = None
    stall = 0
    rng_b = range(nb)
    for it in range(1, max_iter + 1):
        AX = sum(blocks[k].apply(X[k]) for k in rng_b) + A_lp @ x
        rp = b - AX
        Rd = [blocks[k].C - Z[k] - blocks[k].adjoint(y) for k in rng_b]
        rd = c_lp - z - A_lp.T @ y
        pobj = sum(float(np.real(np.vdot(blocks[k].C, X[k]))) for k in rng_b) + float(c_lp @ x)
        dobj = float(b @ y)
        mu = (sum(float(np.real(np.vdot(X[k], Z[k]))) for k in rng_b) + float(x @ z)) / ntot
        relp = np.linalg.norm(rp) / (1.0 + bnorm)
        reld = np.sqrt(sum(np.sum(np.abs(R) ** 2) for R in Rd) + np.sum(rd ** 2)) / 2.0  # ||C|| = 1 after scaling
        relg = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        err = max(relp, reld, relg)
        if best is None or err < best[0]:
            best = (err, [Xk.copy() for Xk in X], x.copy(), y.copy(), [Zk.copy() for Zk in Z], z.copy(), pobj, dobj)
        info = {"relp": relp, "reld": reld, "relgap": relg, "mu": mu}
        if err <= tol:
            status = "optimal"
            break
        # infeasibility certificates on the scaled problem
        if dobj > 1e6:
            ray = np.sqrt(sum(np.sum(np.abs(blocks[k].C - Rd[k]) ** 2) for k in rng_b) + np.sum((c_lp - rd) ** 2))
            if ray / dobj < 1e-8:
                status = "infeasible"
                break
        if pobj < -1e6 and np.linalg.norm(AX) / -pobj < 1e-8:
            status = "dual_infeasible"
            break

        inv = _batched(np.linalg.inv, LX + LZ)
        LXi, LZi = inv[:nb], inv[nb:]
        Zi = [Li.conj().T @ Li for Li in LZi]
        M = np.zeros((m, m))
        for k in rng_b:
            blocks[k].schur(X[k], Zi[k], M)
        if p:
            M += (A_lp * (x / z)) @ A_lp.T
        M = 0.5 * (M + M.T)
        LM = _chol(M)
        if LM is None:
            M += (1e-14 * np.trace(M) / m + 1e-300) * np.eye(m)
            LM = _chol(M)
            if LM is None:
                info["reason"] = "schur matrix not positive definite"
                break
        XRZ = [X[k] @ Rd[k] @ Zi[k] for k in rng_b]

        def direction(sig, Rc, rc):
            G = []
            rhs = rp.copy()
            for k in rng_b:
                Gk = sig * mu * Zi[k] - X[k] - XRZ[k]
                if Rc is not None:
                    Gk = Gk - Rc[k] @ Zi[k]
                G.append(Gk)
                rhs -= blocks[k].apply(Gk)
            g = sig * mu / z - x - x * rd / z
            if rc is not None:
                g = g - rc / z
            if p:
                rhs -= A_lp @ g
            dy = cho_solve((LM, True), rhs, check_finite=False)
            dX, dZ = [], []
            for k in rng_b:
                ady = blocks[k].adjoint(dy)
                dZ.append(Rd[k] - ady)
                dX.append(_herm(G[k] + X[k] @ ady @ Zi[k]))
            atdy = A_lp.T @ dy
            return dX, g + x * atdy / z, dy, dZ, rd - atdy

        def steps(dX, dx, dZ, dz):
            al = _max_steps(LXi + LZi, dX + dZ)
            if p:
                lp = _max_step_lp(np.concatenate([x, z]), np.concatenate([dx, dz]), p)
            ap = min(al[:nb] + ([lp[0]] if p else []))
            ad = min(al[nb:] + ([lp[1]] if p else []))
            return min(1.0, step * ap), min(1.0, step * ad)

        dX, dx, dy, dZ, dz = direction(0.0, None, None)
        ap, ad = steps(dX, dx, dZ, dz)
        mu_a = (sum(float(np.real(np.vdot(X[k] + ap * dX[k], Z[k] + ad * dZ[k]))) for k in rng_b)
                + float((x + ap * dx) @ (z + ad * dz))) / ntot
        sig = min(1.0, max(0.0, (mu_a / mu) ** 3)) if mu > 0 else 0.0
        dX, dx, dy, dZ, dz = direction(sig, [dX[k] @ dZ[k] for k in rng_b], dx * dz if p else None)
        ap, ad = steps(dX, dx, dZ, dz)
        if ap < 1e-10 and ad < 1e-10:
            stall += 1
            if stall >= 3:
                info["reason"] = "step length collapsed"
                break
        else:
            stall = 0
        for _ in range(8):
            Xn = [_herm(X[k] + ap * dX[k]) for k in rng_b]
            Zn = [_herm(Z[k] + ad * dZ[k]) for k in rng_b]
            Ln = _chol_all(Xn + Zn)
            LXn, LZn = Ln[:nb], Ln[nb:]
            if all(L is not None for L in Ln):
                break
            ap *= 0.5
            ad *= 0.5
        else:
            info["reason"] = "could not keep iterates definite"
            break
        X, Z, LX, LZ = Xn, Zn, LXn, LZn
        if p:
            x = x + ap * dx
            z = z + ad * dz
        y = y + ad * dy

    if status == "numeric-failure" and best is not None:
        err, X, x, y, Z, z, pobj, dobj = best
        info["best_error"] = err

    X = [bs * Xk for Xk in X]
    Z = [cs * Zk for Zk in Z]
    info["scale_b"] = bs
    info["scale_c"] = cs
    return IpmResult(status, X, bs * x, cs * y / rn, Z, cs * z, pobj * cs * bs, dobj * cs * bs, it, info)
