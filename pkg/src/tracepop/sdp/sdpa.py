"""SDPA sparse (``.dat-s``) writer and reader.

SDPA's primal is ``min c^T x  s.t.  sum_i F_i x_i - F_0 >= 0``, so a block's
constant part ``G`` is written as ``F_0 = -G``.  Linear equalities ``a^T y = b``
have no native encoding.  A row fixing a single variable (such as the
normalization ``y_0 = 1``) is substituted out: the variable disappears from
the file, its matrices are folded into ``F_0`` and the cost into the offset.
``*fixed`` / ``*fixentry`` comments record what was folded so that
:func:`read_sdpa` restores the original problem; other tools ignore them.
The remaining rows go into one diagonal (LP) block of size ``-2k`` holding
the pairs ``a^T y - b >= 0`` and ``b - a^T y >= 0``, announced by an
``*equalities k`` comment.  ``*offset v`` carries a nonzero objective
constant.  Floats are written with ``repr`` so a round trip is exact.
"""
from __future__ import annotations

import re
from typing import List

import numpy as np
import scipy.sparse as sp

from .core import Block, ConicProblem, ProblemFormatError


def _fmt(x: float) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _entries(p: ConicProblem):
    """Per block: ``{(var, i, j): value}`` with ``var == -1`` for ``G``."""
    out = []
    for b in p.blocks:
        cb = b.canonical()
        out.append({(v, i, j): x for v, i, j, x in zip(cb.var.tolist(), cb.row.tolist(), cb.col.tolist(),
                                                       cb.val.tolist())})
    return out


def _fold_fixed(p: ConicProblem):
    """Substitute out rows ``a * y_i = b`` whose variable occurs in no other row.

    A variable is folded only if the reader's reconstruction ``(g + v f) - v f``
    reproduces every touched entry bit for bit.
    """
    A = p.eq_A.tocsr()
    A.sort_indices()
    per_var = np.bincount(A.indices, minlength=p.m) if A.nnz else np.zeros(p.m, dtype=int)
    ents = _entries(p)
    offset = float(p.offset)
    fixed = []  # (row, var, a, b, cost, [(blk, i, j, f)])
    for r in range(A.shape[0]):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        if hi - lo != 1:
            continue
        i, a = int(A.indices[lo]), float(A.data[lo])
        if a == 0.0 or per_var[i] != 1:
            continue
        b = float(p.eq_b[r])
        v = b / a
        cost = float(p.c[i])
        fs = [(bi, ri, ci, x) for bi, E in enumerate(ents) for (var, ri, ci), x in E.items() if var == i]
        ok = (offset + cost * v) - cost * v == offset
        for bi, ri, ci, f in fs:
            g = ents[bi].get((-1, ri, ci), 0.0)
            if (g + v * f) - v * f != g:
                ok = False
        if not ok:
            continue
        for bi, ri, ci, f in fs:
            E = ents[bi]
            del E[(i, ri, ci)]
            comb = E.get((-1, ri, ci), 0.0) + v * f
            if comb == 0.0:
                E.pop((-1, ri, ci), None)
            else:
                E[(-1, ri, ci)] = comb
        offset += cost * v
        fixed.append((r, i, a, b, cost, fs))
    return ents, offset, fixed


def export_sdpa(p: ConicProblem) -> str:
    p.validate()
    ents, offset, fixed = _fold_fixed(p)
    gone_vars = {f[1] for f in fixed}
    gone_rows = {f[0] for f in fixed}
    keep = [i for i in range(p.m) if i not in gone_vars]
    new_index = {i: k for k, i in enumerate(keep)}
    rows = [r for r in range(p.n_eq) if r not in gone_rows]
    k = len(rows)
    sizes = [str(b.size) for b in p.blocks]
    if k:
        sizes.append(str(-2 * k))
    lines = []
    for r, i, a, b, cost, fs in fixed:
        lines.append(f"*fixed {r + 1} {i + 1} {_fmt(a)} {_fmt(b)} {_fmt(cost)}")
        for bi, ri, ci, f in fs:
            lines.append(f"*fixentry {i + 1} {bi + 1} {ri + 1} {ci + 1} {_fmt(f)}")
    if k:
        lines.append(f"*equalities {k}")
    if offset != 0.0:
        lines.append(f"*offset {offset!r}")
    lines.append(str(len(keep)))
    lines.append(str(len(sizes)))
    lines.append(" ".join(sizes))
    lines.append(" ".join(_fmt(p.c[i]) for i in keep) if keep else "")

    entries = []  # (matno, blkno, i, j, value), 1-based indices
    for bi, E in enumerate(ents, start=1):
        for (v, i, j), x in E.items():
            if v < 0:
                entries.append((0, bi, i + 1, j + 1, -x))
            else:
                entries.append((new_index[v] + 1, bi, i + 1, j + 1, x))
    if k:
        lp = len(p.blocks) + 1
        A = p.eq_A.tocsr()
        for pos, r in enumerate(rows):
            row = A.getrow(r).tocoo()
            for v, x in zip(row.col.tolist(), row.data.tolist()):
                entries.append((new_index[v] + 1, lp, 2 * pos + 1, 2 * pos + 1, x))
                entries.append((new_index[v] + 1, lp, 2 * pos + 2, 2 * pos + 2, -x))
            bval = float(p.eq_b[r])
            if bval != 0.0:
                entries.append((0, lp, 2 * pos + 1, 2 * pos + 1, bval))
                entries.append((0, lp, 2 * pos + 2, 2 * pos + 2, -bval))
    entries.sort(key=lambda e: e[:4])
    for e in entries:
        lines.append(f"{e[0]} {e[1]} {e[2]} {e[3]} {_fmt(e[4])}")
    return "\n".join(lines) + "\n"


_SEP = re.compile(r"[\s,{}()]+")


def _numbers(line: str) -> List[str]:
    return [t for t in _SEP.split(line) if t]


def read_sdpa(text: str) -> ConicProblem:
    """Parse ``.dat-s`` text; inverse of :func:`export_sdpa`."""
    n_equalities = 0
    offset = 0.0
    fixed = []  # (row, var, a, b, cost), 0-based
    fix_entries: dict = {}
    body: List[str] = []
    try:
        for raw in text.splitlines():
            s = raw.strip()
            if not s:
                continue
            if s[0] in "*\"":
                t = s[1:].split()
                if t and t[0] == "equalities":
                    n_equalities = int(t[1])
                elif t and t[0] == "offset":
                    offset = float(t[1])
                elif t and t[0] == "fixed":
                    fixed.append((int(t[1]) - 1, int(t[2]) - 1, float(t[3]), float(t[4]), float(t[5])))
                elif t and t[0] == "fixentry":
                    fix_entries.setdefault(int(t[1]) - 1, []).append(
                        (int(t[2]) - 1, int(t[3]) - 1, int(t[4]) - 1, float(t[5])))
                continue
            body.append(s)
    except (IndexError, ValueError) as e:
        raise ProblemFormatError(f"malformed comment directive: {e}") from None
    toks: List[str] = []
    for s in body:
        toks.extend(_numbers(s))
    try:
        m = int(toks[0])
        nb = int(toks[1])
        sizes = [int(t) for t in toks[2:2 + nb]]
        pos = 2 + nb
        c = np.array([float(t) for t in toks[pos:pos + m]])
        pos += m
    except (IndexError, ValueError) as e:
        raise ProblemFormatError(f"malformed SDPA header: {e}") from None
    rest = toks[pos:]
    if len(rest) % 5:
        raise ProblemFormatError("entry lines must have five fields")
    trip: List[List[tuple]] = [[] for _ in range(nb)]
    for q in range(0, len(rest), 5):
        try:
            matno, blk, i, j = (int(t) for t in rest[q:q + 4])
            x = float(rest[q + 4])
        except ValueError as e:
            raise ProblemFormatError(f"bad entry: {e}") from None
        if not (0 <= matno <= m and 1 <= blk <= nb):
            raise ProblemFormatError("entry references unknown matrix or block")
        if i > j:
            i, j = j, i
        if matno == 0:
            trip[blk - 1].append((-1, i - 1, j - 1, -x))
        else:
            trip[blk - 1].append((matno - 1, i - 1, j - 1, x))

    blocks: List[Block] = []
    eq_A = sp.csr_matrix((0, m))
    eq_b = np.zeros(0)
    eq_block = nb - 1 if n_equalities else None
    for bi in range(nb):
        size = sizes[bi]
        if bi == eq_block:
            if size != -2 * n_equalities:
                raise ProblemFormatError("equality block size does not match *equalities")
            rows, cols, vals = [], [], []
            b = np.zeros(n_equalities)
            for v, i, j, x in trip[bi]:
                if i != j:
                    raise ProblemFormatError("LP block entries must be diagonal")
                if i % 2:
                    continue  # mirrored copy
                r = i // 2
                if v < 0:
                    b[r] = -x
                else:
                    rows.append(r)
                    cols.append(v)
                    vals.append(x)
            eq_A = sp.csr_matrix((vals, (rows, cols)), shape=(n_equalities, m))
            eq_b = b
        elif size < 0:
            for k in range(-size):
                sub = [(v, 0, 0, x) for v, i, j, x in trip[bi] if i == j == k]
                if any(i != j for _, i, j, _ in trip[bi]):
                    raise ProblemFormatError("LP block entries must be diagonal")
                blocks.append(Block.from_triplets(1, sub).canonical())
        else:
            blocks.append(Block.from_triplets(size, trip[bi]).canonical())
    p = ConicProblem(m, c, blocks, eq_A, eq_b, offset)
    if fixed:
        p = _unfold_fixed(p, fixed, fix_entries)
    return p.validate()


def _unfold_fixed(p: ConicProblem, fixed, fix_entries) -> ConicProblem:
    """Undo :func:`_fold_fixed`: reinsert variables, entries and rows."""
    m = p.m + len(fixed)
    gone = {i for _, i, _, _, _ in fixed}
    if len(gone) != len(fixed) or max(gone) >= m:
        raise ProblemFormatError("inconsistent *fixed directives")
    keep = [i for i in range(m) if i not in gone]
    ents = []
    for b in p.blocks:
        E = {}
        for v, i, j, x in zip(b.var.tolist(), b.row.tolist(), b.col.tolist(), b.val.tolist()):
            E[(keep[v] if v >= 0 else -1, i, j)] = x
        ents.append(E)
    if len(ents) < len(p.blocks):
        raise ProblemFormatError("bad block reference in *fixentry")
    c = np.zeros(m)
    c[keep] = p.c
    offset = float(p.offset)
    for r, i, a, b, cost in reversed(fixed):
        v = b / a
        for bi, ri, ci, f in fix_entries.get(i, []):
            if not 0 <= bi < len(ents):
                raise ProblemFormatError("bad block reference in *fixentry")
            E = ents[bi]
            g = E.get((-1, ri, ci), 0.0) - v * f
            if g == 0.0:
                E.pop((-1, ri, ci), None)
            else:
                E[(-1, ri, ci)] = g
            E[(i, ri, ci)] = f
        offset -= cost * v
        c[i] = cost
    blocks = [Block.from_triplets(b.size, [(v, i, j, x) for (v, i, j), x in E.items()]).canonical()
              for b, E in zip(p.blocks, ents)]
    n_rows = p.n_eq + len(fixed)
    fixed_rows = {r: (i, a, b) for r, i, a, b, _ in fixed}
    other = iter(range(p.n_eq))
    A_old = p.eq_A.tocsr()
    rows, cols, vals, rhs = [], [], [], []
    for r in range(n_rows):
        if r in fixed_rows:
            i, a, b = fixed_rows[r]
            rows.append(r)
            cols.append(i)
            vals.append(a)
            rhs.append(b)
        else:
            q = next(other)
            row = A_old.getrow(q).tocoo()
            for v, x in zip(row.col.tolist(), row.data.tolist()):
                rows.append(r)
                cols.append(keep[v])
                vals.append(x)
            rhs.append(float(p.eq_b[q]))
    E = sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, m))
    return ConicProblem(m, c, blocks, E, np.array(rhs), offset)


def reduced_layout(p: ConicProblem):
    """How the exported file maps to ``p``: kept variables, fixed values, LP rows."""
    _, _, fixed = _fold_fixed(p)
    gone = {f[1]: f[3] / f[2] for f in fixed}
    keep = [i for i in range(p.m) if i not in gone]
    return keep, gone, p.n_eq - len(fixed)


def expand_solution(p: ConicProblem, y_reduced) -> np.ndarray:
    """Full moment vector from a solution of the exported (reduced) problem."""
    keep, gone, _ = reduced_layout(p)
    y = np.zeros(p.m)
    y[keep] = np.asarray(y_reduced, dtype=float)
    for i, v in gone.items():
        y[i] = v
    return y


def write_sdpa(p: ConicProblem, path) -> None:
    with open(path, "w") as fh:
        fh.write(export_sdpa(p))


def load_sdpa(path) -> ConicProblem:
    with open(path) as fh:
        return read_sdpa(fh.read())
