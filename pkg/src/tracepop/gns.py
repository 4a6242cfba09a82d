"""Flatness detection and finite-dimensional minimizer extraction.

Given an optimal moment vector of order ``D = d + delta`` whose Hankel block
has the same rank on words of degree ``<= d`` as on the full basis, the GNS
construction yields multiplication matrices ``A_i`` on an ``r``-dimensional
space.  The real algebra they generate is split into irreducible blocks by
repeatedly diagonalizing random symmetric elements of its commutant; blocks
carrying equivalent representations are merged into one component whose weight
is the squared norm of the cyclic vector on that isotypic part.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from .algebra import TraceMonomial, TracePoly, Word, _check_tuple, _WordCache, deglex_key
from .basis import reduce
from .relaxation import AssembledRelaxation, ProblemSpec, RelaxationResult


class ExtractionError(RuntimeError):
    pass


@dataclass
class MomentFunctional:
    """Class-shared moment values on the basis of an assembled relaxation."""

    relax: AssembledRelaxation
    y: np.ndarray
    provenance: str = ""

    @classmethod
    def from_result(cls, res: RelaxationResult) -> "MomentFunctional":
        return cls(res.relaxation, np.asarray(res.result.y, dtype=float),
                   f"{res.result.solver} solve, status {res.status}, order {res.d}")

    @property
    def order(self) -> int:
        return self.relax.d

    def hankel(self) -> np.ndarray:
        return self.relax.hankel_matrix(self.y)

    def value(self, f: TracePoly) -> float:
        return self.relax.moment(f, self.y)

    def n_upto(self, d: int) -> int:
        """Basis entries of degree <= d form a prefix of the basis."""
        return sum(1 for m in self.relax.basis.entries if m.degree <= d)


@dataclass
class FlatnessReport:
    flat: bool
    rank: int  # rank on words of degree <= d
    rank_full: int  # rank on the whole order-(d + delta) basis
    d: int
    delta: int
    singular_values: np.ndarray
    gap: float  # ratio between the last kept and first dropped singular value

    @property
    def r(self) -> int:
        return self.rank


def _numerical_rank(sv: np.ndarray, rank_tol: float, scale: float) -> int:
    return int(np.sum(sv > rank_tol * scale))


def check_flatness(L: MomentFunctional, d: int, delta: Optional[int] = None, rank_tol: float = 1e-6) -> FlatnessReport:
    if delta is None:
        delta = L.order - d
    if d + delta != L.order or delta < 0:
        raise ValueError(f"functional has order {L.order}, cannot test flatness at ({d}, {delta})")
    M = L.hankel()
    sv_full = la.svdvals(M)
    scale = float(sv_full[0]) if len(sv_full) else 1.0
    k = L.n_upto(d)
    sv = la.svdvals(M[:k, :k])
    r = _numerical_rank(sv, rank_tol, scale)
    rf = _numerical_rank(sv_full, rank_tol, scale)
    kept = sv_full[rf - 1] if rf > 0 else scale
    dropped = sv_full[rf] if rf < len(sv_full) else 0.0
    gap = float(dropped / kept) if kept > 0 else 0.0
    if r == rf and gap > 1e-2:
        warnings.warn(f"flatness verdict is borderline (singular value ratio {gap:.2e})")
    return FlatnessReport(r == rf, r, rf, d, delta, sv_full, gap)


@dataclass
class Component:
    matrices: List[np.ndarray]
    weight: float
    multiplicity: int = 1

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0] if self.matrices else 0


@dataclass
class Minimizer:
    components: List[Component]
    n: int
    names: Optional[List[str]] = None
    info: Dict[str, object] = field(default_factory=dict)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def to_json(self) -> str:
        """Per component: dimension, weight, matrices as row-major nested lists (repr precision)."""
        doc = dict(
            n=self.n,
            names=self.names,
            components=[
                dict(dim=c.dim, weight=c.weight, multiplicity=c.multiplicity,
                     matrices=[A.tolist() for A in c.matrices])
                for c in self.components
            ],
        )
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Minimizer":
        doc = json.loads(text)
        comps = [Component([np.array(A, dtype=float) for A in c["matrices"]], float(c["weight"]),
                           int(c.get("multiplicity", 1))) for c in doc["components"]]
        return cls(comps, int(doc["n"]), doc.get("names"))

    def mixture(self) -> List[Tuple[List[np.ndarray], float]]:
        return [(c.matrices, c.weight) for c in self.components]


# -- block diagonalization ------------------------------------------------------

def _commutant_basis(mats: Sequence[np.ndarray], tol: float) -> np.ndarray:
    """Orthonormal basis (columns, vec form) of {Z : A Z = Z A for all A}."""
    r = mats[0].shape[0]
    eye = np.eye(r)
    rows = [np.kron(eye, A) - np.kron(A.T, eye) for A in mats]
    K = np.vstack(rows) if rows else np.zeros((1, r * r))
    _, s, vt = la.svd(K)
    scale = max(1.0, float(s[0]) if len(s) else 1.0)
    rank = int(np.sum(s > tol * scale))
    return vt[rank:].T


def symmetric_commutant_dim(mats, tol) -> int:
    B = _commutant_basis(mats, tol)
    r = mats[0].shape[0]
    if B.shape[1] == 0:
        return 0
    # symmetric parts of basis elements
    sym = np.stack([(0.5 * (b.reshape(r, r) + b.reshape(r, r).T)).ravel() for b in B.T], axis=1)
    s = la.svdvals(sym)
    return int(np.sum(s > tol * max(1.0, s[0])))


def _split_once(mats, rng, tol) -> Optional[List[np.ndarray]]:
    """Orthonormal bases of a nontrivial invariant splitting, or None if irreducible."""
    r = mats[0].shape[0]
    if r == 1:
        return None
    B = _commutant_basis(mats, tol)
    if B.shape[1] <= 1:
        return None
    Z = (B @ rng.standard_normal(B.shape[1])).reshape(r, r)
    Z = 0.5 * (Z + Z.T)
    w, V = la.eigh(Z)
    spread = max(1e-300, float(w[-1] - w[0]))
    if spread <= tol * max(1.0, float(np.abs(w).max())):
        return None
    groups = []
    start = 0
    for i in range(1, r + 1):
        if i == r or (w[i] - w[i - 1]) > 1e3 * tol * spread + tol:
            groups.append(V[:, start:i])
            start = i
    return groups if len(groups) > 1 else None


def block_diagonalize(mats: Sequence[np.ndarray], tol: float = 1e-8, seed: int = 0, max_depth: int = 32):
    """Orthogonal ``Q`` and block sizes with ``Q^T A_i Q`` block diagonal.

    Blocks are irreducible for the generated real *-algebra unless the
    refinement depth runs out, in which case a coarser (still valid) partition
    is returned.
    """
    mats = [0.5 * (np.asarray(A, float) + np.asarray(A, float).T) for A in mats]
    r = mats[0].shape[0]
    rng = np.random.default_rng(seed)

    def rec(U: np.ndarray, depth: int) -> List[np.ndarray]:
        sub = [U.T @ A @ U for A in mats]
        if depth >= max_depth:
            return [U]
        parts = _split_once(sub, rng, tol)
        if parts is None:
            return [U]
        out = []
        for P in parts:
            out.extend(rec(U @ P, depth + 1))
        return out

    bases = rec(np.eye(r), 0)
    Q = np.hstack(bases)
    # re-orthonormalize against accumulated rounding
    q, rr = la.qr(Q)
    Q = q * np.sign(np.diag(rr))
    return Q, [b.shape[1] for b in bases]


def _intertwines(A: Sequence[np.ndarray], B: Sequence[np.ndarray], tol: float) -> bool:
    """Is there a nonzero T with A_i T = T B_i for all i?"""
    if A[0].shape != B[0].shape:
        return False
    r = A[0].shape[0]
    eye = np.eye(r)
    K = np.vstack([np.kron(eye, a) - np.kron(b.T, eye) for a, b in zip(A, B)])
    s = la.svdvals(K)
    return bool(s[-1] <= tol * max(1.0, float(s[0])))


# -- GNS --------------------------------------------------------------------------

def _pivoted_basis(M: np.ndarray, r: int, floor: float) -> List[int]:
    """Greedy pivoted Cholesky on a PSD matrix: ``r`` pivots, index 0 first."""
    n = M.shape[0]
    diag = np.array(np.diag(M), dtype=float)
    L = np.zeros((n, 0))
    chosen: List[int] = []
    resid = diag.copy()
    while len(chosen) < r:
        if not chosen:
            j = 0
        else:
            masked = resid.copy()
            masked[chosen] = -np.inf
            j = int(np.argmax(masked))
        if resid[j] <= floor:
            break
        col = (M[:, j] - L @ L[j]) / np.sqrt(resid[j])
        L = np.hstack([L, col[:, None]])
        resid = diag - np.sum(L * L, axis=1)
        chosen.append(j)
    return chosen


def pure_trace_gns(
    L: MomentFunctional,
    d: int,
    delta: Optional[int] = None,
    rank_tol: float = 1e-6,
    scalar_tol: float = 1e-5,
    sym_tol: float = 1e-6,
    block_tol: float = 1e-7,
    seed: int = 0,
) -> Minimizer:
    """Extract weighted matrix tuples from a flat optimal functional."""
    if delta is None:
        delta = L.order - d
    if delta < 1:
        raise ExtractionError("extraction needs delta >= 1 to form multiplication operators")
    report = check_flatness(L, d, delta, rank_tol)
    if not report.flat:
        raise ExtractionError(f"not flat at (d={d}, delta={delta}): rank {report.rank} vs {report.rank_full}")
    relax = L.relax
    rules = relax.rules
    M = L.hankel()
    scale = float(report.singular_values[0])
    k = L.n_upto(d)
    W = _pivoted_basis(M[:k, :k], report.rank, 1e-14 * scale)
    r = len(W)
    if r != report.rank:
        warnings.warn(f"pivoted column basis has {r} columns, numerical rank is {report.rank}")
    words = relax.basis.entries
    index = relax.basis.index

    Mh = M[np.ix_(W, W)]
    try:
        C = la.cholesky(Mh, lower=False)  # C^T C = Mh
    except la.LinAlgError:
        raise ExtractionError("principal submatrix on the column basis is not positive definite") from None
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > 1e10:
        raise ExtractionError(f"Cholesky factor ill-conditioned (cond {cond:.2e})")
    Cinv = la.solve_triangular(C, np.eye(r), lower=False)
    calC = M[:, W]

    def operator(cols: List[int]) -> np.ndarray:
        Ab, *_ = la.lstsq(calC, M[:, cols])
        return C @ Ab @ Cinv

    def lookup(m: TraceMonomial) -> int:
        key = TraceMonomial(m.factors, reduce(m.tail, rules))
        i = index.get(key)
        if i is None:
            raise ExtractionError(f"word of degree {m.degree} missing from the order-{L.order} basis")
        return i

    mats = []
    asym = 0.0
    for i in range(relax.spec.n):
        cols = [lookup(TraceMonomial(words[w].factors, (i,) + words[w].tail)) for w in W]
        A = operator(cols)
        nrm = max(1.0, float(np.abs(A).max()))
        a = float(np.abs(A - A.T).max()) / nrm
        asym = max(asym, a)
        if a > sym_tol:
            raise ExtractionError(f"multiplication matrix for {relax.spec.names[i]} not symmetric (asymmetry {a:.2e})")
        mats.append(0.5 * (A + A.T))

    # pure trace words must act as scalars
    worst = 0.0
    for t in relax.basis.entries:
        if not t.is_pure or not t.factors or t.degree > L.order - d:
            continue
        cols = []
        for w in W:
            fs = tuple(sorted(words[w].factors + t.factors, key=deglex_key))
            cols.append(lookup(TraceMonomial(fs, words[w].tail)))
        B = operator(cols)
        val = L.y[relax.class_index[relax.key(t)]]
        worst = max(worst, float(np.abs(B - val * np.eye(r)).max()))
    if worst > scalar_tol:
        raise ExtractionError(
            f"extraction inapplicable: pure trace words do not act as scalars (deviation {worst:.2e})"
        )

    v = C[:, 0].copy()  # C e_1
    Q, sizes = block_diagonalize(mats, block_tol, seed)
    qv = Q.T @ v
    blocks: List[Tuple[List[np.ndarray], float]] = []
    off = 0
    for s in sizes:
        sl = slice(off, off + s)
        Bs = [(Q.T @ A @ Q)[sl, sl] for A in mats]
        blocks.append((Bs, float(qv[sl] @ qv[sl])))
        off += s

    # merge equivalent irreducible blocks (same representation, other basis)
    comps: List[Component] = []
    reps: List[List[np.ndarray]] = []
    for Bs, w2 in blocks:
        for ci, R in enumerate(reps):
            if _intertwines(R, Bs, 1e3 * block_tol):
                comps[ci].weight += w2
                comps[ci].multiplicity += 1
                break
        else:
            reps.append(Bs)
            comps.append(Component([0.5 * (B + B.T) for B in Bs], w2))
    comps = [c for c in comps if c.weight > 1e-12]
    info = dict(rank=r, column_basis=[words[w] for w in W], asymmetry=asym, scalar_deviation=worst,
                block_sizes=sizes, flatness=report)
    return Minimizer(comps, relax.spec.n, relax.spec.names, info)


# -- validation -------------------------------------------------------------------

def mixture_traces(components) -> callable:
    caches = []
    for A, w in components:
        mats, k = _check_tuple(A, len(A))
        caches.append((_WordCache([np.asarray(X, dtype=float) for X in mats], k), float(w)))

    def tr(u: Word) -> float:
        return sum(w * float(c.tr(u)) for c, w in caches)

    return tr, caches


def evaluate_on_mixture(f: TracePoly, components) -> List[object]:
    """Evaluate ``f`` with traces taken in the weighted tracial state.

    Returns one matrix per component (the tail part acts blockwise), or a
    single scalar when ``f`` is pure.
    """
    tr, caches = mixture_traces(components)
    if f.is_pure:
        total = 0.0
        for m, c in f.terms.items():
            s = float(c)
            for u in m.factors:
                s *= tr(u)
            total += s
        return [total]
    out = []
    for cache, _ in caches:
        M = np.zeros((cache.k, cache.k))
        for m, c in f.terms.items():
            s = float(c)
            for u in m.factors:
                s *= tr(u)
            M = M + s * cache.prod(m.tail)
        out.append(M)
    return out


@dataclass
class ValidationReport:
    ok: bool
    weight_sum: float
    moment_error: float
    objective_error: float
    objective_value: float
    constraint_violations: List[Tuple[str, int, float]]
    messages: List[str]


def validate_minimizer(minz: Minimizer, spec: ProblemSpec, L: Optional[MomentFunctional] = None,
                       tol: float = 1e-6) -> ValidationReport:
    msgs = []
    comps = minz.mixture()
    wsum = float(sum(w for _, w in comps))
    ok = True
    if abs(wsum - 1.0) > tol:
        ok = False
        msgs.append(f"weights sum to {wsum:.12g}, not 1")
    viol = []
    for c in spec.constraints:
        g = c.as_poly()
        vals = evaluate_on_mixture(g, comps)
        for j, V in enumerate(vals):
            if np.ndim(V) == 0:
                lo = float(V)
                if c.kind != "inequality":
                    lo = -abs(lo)
            else:
                V = np.asarray(V, float)
                if c.kind == "inequality":
                    lo = float(la.eigvalsh(0.5 * (V + V.T))[0])
                else:
                    lo = -float(np.abs(V).max(initial=0.0))
            if lo < -tol:
                ok = False
                viol.append((c.kind, j, lo))
                msgs.append(f"component {j} violates {c.kind} constraint (eigenvalue/residual {lo:.3e})")
    # the ball N - x_j^2 >= 0; variables with a square rule are bounded already
    rules = spec.rules()
    for j in range(spec.n):
        if j in rules:
            continue
        for c, (mats, _) in enumerate(comps):
            A = np.asarray(mats[j], float)
            lo = float(la.eigvalsh(float(spec.bound) * np.eye(len(A)) - A @ A)[0])
            if lo < -tol:
                ok = False
                viol.append(("boundedness", c, lo))
                msgs.append(f"component {c} violates {spec.bound} - {spec.names[j]}^2 >= 0 (eigenvalue {lo:.3e})")
    obj = float(evaluate_on_mixture(spec.objective, comps)[0])
    mom_err = 0.0
    obj_err = 0.0
    if L is not None:
        tr, _ = mixture_traces(comps)
        for i, m in enumerate(L.relax.class_reps):
            v = 1.0
            for u in m.factors:
                v *= tr(u)
            mom_err = max(mom_err, abs(v - L.y[i]))
        obj_err = abs(obj - L.value(spec.objective))
        if mom_err > tol:
            ok = False
            msgs.append(f"moment reproduction error {mom_err:.3e}")
        if obj_err > tol:
            ok = False
            msgs.append(f"objective mismatch {obj_err:.3e}")
    return ValidationReport(ok, wsum, mom_err, obj_err, obj, viol, msgs)
