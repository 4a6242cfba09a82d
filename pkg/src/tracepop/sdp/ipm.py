"""Dense infeasible-start primal-dual interior-point method.

HKM search direction with a Mehrotra predictor-corrector, Schur complement
solved by Cholesky.  Equalities are eliminated up front with a
rank-revealing QR so the core iteration only sees linear matrix inequalities.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .core import (
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    ConicProblem,
    ProblemSizeError,
    SolveResult,
    SolverSettings,
)

log = logging.getLogger(__name__)

_RAY_SCALE = 1e10


@dataclass
class _Reduced:
    """LMI-only problem in the variables z, with y = t + T z."""

    sizes: List[int]
    G: List[np.ndarray]  # constant matrices
    F: List[sp.csc_matrix]  # (s*s, k) full-symmetric vec coefficients
    c: np.ndarray
    offset: float
    T: sp.csr_matrix
    t: np.ndarray


def _eliminate(p: ConicProblem) -> Tuple[_Reduced, float]:
    m = p.m
    if p.n_eq:
        E = p.eq_A.toarray()
        Q, R, piv = la.qr(E, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        tol = max(E.shape) * np.finfo(float).eps * (diag[0] if len(diag) else 0.0) * 10
        r = int(np.sum(diag > tol))
        qf = Q.T @ p.eq_b
        inconsistency = float(np.linalg.norm(qf[r:])) if r < len(qf) else 0.0
        basic, free = piv[:r], piv[r:]
        R11, R12 = R[:r, :r], R[:r, r:]
        t = np.zeros(m)
        t[basic] = la.solve_triangular(R11, qf[:r])
        W = -la.solve_triangular(R11, R12)
        W[np.abs(W) < 1e-14] = 0.0
        Wc = sp.coo_matrix(W)
        rows = np.concatenate([free, basic[Wc.row]])
        cols = np.concatenate([np.arange(len(free)), Wc.col])
        vals = np.concatenate([np.ones(len(free)), Wc.data])
        T = sp.csr_matrix((vals, (rows, cols)), shape=(m, len(free)))
    else:
        inconsistency = 0.0
        t = np.zeros(m)
        T = sp.identity(m, format="csr")
    sizes, Gs, Fs = [], [], []
    for b in p.blocks:
        st = b.stacked(m)
        const = np.asarray(st[:, 0].todense()).ravel() + st[:, 1:] @ t
        Fv = sp.csc_matrix(st[:, 1:] @ T)
        Fv.eliminate_zeros()
        sizes.append(b.size)
        Gs.append(const.reshape(b.size, b.size))
        Fs.append(Fv)
    red = _Reduced(sizes, Gs, Fs, T.T @ p.c, float(p.offset + p.c @ t), sp.csr_matrix(T), t)
    return red, inconsistency


def _adj(red: _Reduced, X: List[np.ndarray]) -> np.ndarray:
    out = np.zeros(len(red.c))
    for F, Xb in zip(red.F, X):
        out += F.T @ Xb.ravel()
    return out


def _op(red: _Reduced, z: np.ndarray) -> List[np.ndarray]:
    return [(F @ z).reshape(s, s) for F, s in zip(red.F, red.sizes)]


def _schur(red: _Reduced, X: List[np.ndarray], Si: List[np.ndarray]) -> np.ndarray:
    k = len(red.c)
    M = np.zeros((k, k))
    for F, Xb, Sb, s in zip(red.F, X, Si, red.sizes):
        indptr, idx, data = F.indptr, F.indices, F.data
        a_all, b_all = np.divmod(idx, s)
        cols = np.nonzero(np.diff(indptr))[0]
        if len(cols) == 0:
            continue
        if F.nnz > 0.25 * s * s * len(cols):
            # dense coefficient matrices: batched products
            Fd = np.zeros((len(cols), s, s))
            for n, j in enumerate(cols):
                sl = slice(indptr[j], indptr[j + 1])
                Fd[n].flat[idx[sl]] = data[sl]
            Y = Sb @ Fd @ Xb
            M[np.ix_(cols, cols)] += Fd.reshape(len(cols), -1) @ Y.reshape(len(cols), -1).T
            continue
        Ft = F.T.tocsr()
        for j in cols:
            sl = slice(indptr[j], indptr[j + 1])
            a, b, w = a_all[sl], b_all[sl], data[sl]
            # tr(F_i X F_j S^-1) = vec(F_i) . vec(S^-1 F_j X)
            Yt = (Sb[:, a] * w) @ Xb[b, :]
            M[:, j] += Ft @ Yt.ravel()
    return 0.5 * (M + M.T)


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    try:
        L = la.cholesky(X, lower=True)
    except la.LinAlgError:
        return 0.0
    Li_dX = la.solve_triangular(L, dX, lower=True)
    W = la.solve_triangular(L, Li_dX.T, lower=True)
    lam = la.eigvalsh(0.5 * (W + W.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _inv_psd(S: np.ndarray) -> np.ndarray:
    c = la.cho_factor(S, lower=True)
    return la.cho_solve(c, np.eye(S.shape[0]))


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def solve_ipm(p: ConicProblem, settings: SolverSettings) -> SolveResult:
    p.validate()
    t0 = time.perf_counter()
    if p.m > settings.max_variables:
        raise ProblemSizeError(
            f"{p.m} variables exceed max_variables={settings.max_variables} "
            f"(dense Schur complement needs ~{8 * p.m * p.m / 1e9:.1f} GB)"
        )
    red, inconsistency = _eliminate(p)
    k = len(red.c)
    nt = sum(red.sizes)

    if inconsistency > 1e-9 * (1 + np.linalg.norm(p.eq_b)):
        return _finish(p, red, INFEASIBLE, np.zeros(k), [np.eye(s) for s in red.sizes],
                       [np.eye(s) for s in red.sizes], 0, {}, "inconsistent equality constraints", [], t0)

    normG = np.sqrt(sum(float(np.sum(G * G)) for G in red.G))
    normc = float(np.linalg.norm(red.c))
    X, S = [], []
    for F, G, s in zip(red.F, red.G, red.sizes):
        colnorm = np.sqrt(np.asarray(F.multiply(F).sum(axis=0)).ravel()) if F.shape[1] else np.zeros(0)
        nz = colnorm > 0
        ratio = np.max((1 + np.abs(red.c[nz])) / (1 + colnorm[nz])) if np.any(nz) else 1.0
        xi = max(10.0, np.sqrt(s), s * ratio)
        eta = max(10.0, np.sqrt(s), float(colnorm.max(initial=0)), float(np.linalg.norm(G)))
        X.append(xi * np.eye(s))
        S.append(eta * np.eye(s))
    z = np.zeros(k)

    history = []
    status = MAX_ITER
    message = ""
    stalls = 0
    it = 0
    for it in range(settings.max_iter + 1):
        Fz = _op(red, z)
        Rd = [G + A - Sb for G, A, Sb in zip(red.G, Fz, S)]
        rp = red.c - _adj(red, X)
        pobj = float(red.c @ z) + red.offset
        dobj = -sum(float(np.vdot(G, Xb)) for G, Xb in zip(red.G, X)) + red.offset
        mu = sum(float(np.vdot(Xb, Sb)) for Xb, Sb in zip(X, S)) / nt
        pinf = np.sqrt(sum(float(np.sum(R * R)) for R in Rd)) / (1 + normG)
        dinf = float(np.linalg.norm(rp)) / (1 + normc)
        gap = abs(pobj - dobj)
        history.append(dict(iter=it, pobj=pobj, dobj=dobj, mu=mu, pinf=pinf, dinf=dinf))
        if settings.verbose:
            log.info("it %3d pobj %+.9e dobj %+.9e mu %.2e pinf %.2e dinf %.2e", it, pobj, dobj, mu, pinf, dinf)

        if gap <= settings.tol_gap * (1 + abs(pobj)) and pinf <= settings.tol_feas and dinf <= settings.tol_feas:
            status = OPTIMAL
            break
        # infeasibility rays
        gX = -sum(float(np.vdot(G, Xb)) for G, Xb in zip(red.G, X))
        if gX > _RAY_SCALE * (1 + normc) and np.linalg.norm(_adj(red, X)) <= 1e-6 * gX:
            status, message = INFEASIBLE, "moment problem infeasible (Gram-side ray)"
            break
        cz = float(red.c @ z)
        if cz < -_RAY_SCALE * (1 + normG) and pinf * (1 + normG) <= 1e-6 * abs(cz):
            status, message = UNBOUNDED, "moment problem unbounded (moment-side ray)"
            break
        if it == settings.max_iter:
            break

        try:
            Si = [_inv_psd(Sb) for Sb in S]
        except la.LinAlgError:
            status, message = NUMERICAL_FAILURE, "slack matrix lost definiteness"
            break
        M = _schur(red, X, Si)
        try:
            fac = la.cho_factor(M, lower=True)
        except la.LinAlgError:
            reg = 1e-14 * max(1.0, float(np.max(np.abs(np.diag(M)))))
            try:
                fac = la.cho_factor(M + reg * np.eye(k), lower=True)
            except la.LinAlgError:
                status, message = NUMERICAL_FAILURE, "Schur complement not positive definite"
                break

        def direction(sigma_mu, corr):
            T1 = []
            for Xb, Sib, R, j in zip(X, Si, Rd, range(len(X))):
                Tm = sigma_mu * Sib - Xb - Xb @ R @ Sib
                if corr is not None:
                    Tm = Tm - corr[0][j] @ corr[1][j] @ Sib
                T1.append(_sym(Tm))
            rhs = _adj(red, T1) - rp
            dz = la.cho_solve(fac, rhs)
            Fdz = _op(red, dz)
            dS = [R + A for R, A in zip(Rd, Fdz)]
            dX = [Tm - _sym(Xb @ A @ Sib) for Xb, Sib, A, Tm in zip(X, Si, Fdz, T1)]
            return dX, dz, dS

        dXp, dzp, dSp = direction(0.0, None)
        ap = min(1.0, min(_max_step(Xb, d) for Xb, d in zip(X, dXp)))
        ad = min(1.0, min(_max_step(Sb, d) for Sb, d in zip(S, dSp)))
        mu_aff = sum(float(np.vdot(Xb + ap * a, Sb + ad * b)) for Xb, a, Sb, b in zip(X, dXp, S, dSp)) / nt
        sigma = min(1.0, (max(mu_aff, 0.0) / mu) ** 3) if mu > 0 else 0.0
        dX, dz, dS = direction(sigma * mu, (dXp, dSp))

        gamma = settings.step_fraction
        ap = min(1.0, gamma * min(_max_step(Xb, d) for Xb, d in zip(X, dX)))
        ad = min(1.0, gamma * min(_max_step(Sb, d) for Sb, d in zip(S, dS)))
        if ap < 1e-10 and ad < 1e-10:
            stalls += 1
            if stalls >= 3:
                status, message = NUMERICAL_FAILURE, "step length collapsed"
                break
        else:
            stalls = 0
        X = [_sym(Xb + ap * d) for Xb, d in zip(X, dX)]
        z = z + ad * dz
        S = [_sym(Sb + ad * d) for Sb, d in zip(S, dS)]

    res = dict(primal=pinf, dual=dinf, gap=abs(pobj - dobj))
    return _finish(p, red, status, z, X, S, it, res, message, history, t0)


def _finish(p, red, status, z, X, S, it, res, message, history, t0) -> SolveResult:
    y = red.t + red.T @ z
    slack = p.slack(y)
    rest = p.c - p.adjoint(X)
    if p.n_eq:
        mu, *_ = np.linalg.lstsq(p.eq_A.toarray().T, rest, rcond=None)
    else:
        mu = np.zeros(0)
    pobj = float(p.c @ y + p.offset)
    dobj = p.gram_objective(X, mu)
    res = dict(res)
    if slack:
        res["min_eig"] = min(float(la.eigvalsh(Sb)[0]) for Sb in slack)
    res["eq_residual"] = float(np.max(np.abs(p.eq_A @ y - p.eq_b), initial=0.0))
    res["time"] = time.perf_counter() - t0
    if status == OPTIMAL and message == "":
        message = f"converged in {it} iterations"
    return SolveResult(
        status=status,
        primal_objective=pobj,
        dual_objective=dobj,
        y=y,
        X=[np.array(Xb) for Xb in X],
        S=slack,
        eq_multipliers=mu,
        iterations=it,
        residuals=res,
        message=message,
        solver="bundled",
        history=history,
    )
