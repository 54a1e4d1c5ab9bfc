"""Sparse LU with fill-reducing ordering and elimination-level scheduling.

The factorization is specialized for the decoupled power flow matrices:
structurally symmetric pattern, diagonally dominant values, diagonal
pivoting only. The symbolic plan (ordering, factor pattern, level
schedule) is computed once per topology and reused for every numeric
factorization and triangular solve, and columns inside one level carry no
mutual dependency so they can be processed concurrently in any order
without changing a single bit of the result.
"""

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .kernels import get_backend

PIVOT_TOL = 1e-12


@dataclass
class SparseMatrix:
    """Compressed sparse column matrix."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @classmethod
    def from_coo(cls, n, rows, cols, vals):
        """Build CSC from triplets, summing duplicates deterministically."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals)
        if len(rows):
            order = np.lexsort((rows, cols))
            rows, cols, vals = rows[order], cols[order], vals[order]
            head = np.empty(len(rows), dtype=bool)
            head[0] = True
            head[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(head)
            data = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
        else:
            data = vals.astype(vals.dtype, copy=True)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(cols, minlength=n), out=indptr[1:])
        return cls(n=n, indptr=indptr, indices=rows, data=data)

    def to_dense(self):
        out = np.zeros((self.n, self.n), dtype=self.data.dtype)
        for j in range(self.n):
            sl = slice(self.indptr[j], self.indptr[j + 1])
            out[self.indices[sl], j] = self.data[sl]
        return out

    @property
    def nnz(self):
        return len(self.indices)


@dataclass
class SymbolicPlan:
    """Ordering, predicted factor pattern, and elimination level schedule."""

    n: int
    perm: np.ndarray  # perm[k] = original index eliminated at step k
    iperm: np.ndarray
    parent: np.ndarray  # elimination tree over permuted indices
    lp: np.ndarray  # L pattern, strictly-below-diagonal rows, CSC
    li: np.ndarray
    up: np.ndarray  # U pattern, dependency columns ascending, diagonal last
    ui: np.ndarray
    levels: list  # arrays of permuted columns, level 0 first
    level_of: np.ndarray
    ap_indptr: np.ndarray  # permuted pattern of the analyzed matrix
    ap_indices: np.ndarray
    ap_map: np.ndarray  # permuted CSC position -> original data position
    src_indptr: np.ndarray  # pattern the plan was built from
    src_indices: np.ndarray
    lr_ptr: np.ndarray  # L by rows (forward-solve pull), values via lr_map
    lr_cols: np.ndarray
    lr_map: np.ndarray
    ur_ptr: np.ndarray  # strict upper U by rows (backward-solve pull)
    ur_cols: np.ndarray
    ur_map: np.ndarray
    diag_pos: np.ndarray  # position of U[j,j] inside U's data
    fill: int

    @property
    def level_count(self):
        return len(self.levels)

    @property
    def level_widths(self):
        return [len(l) for l in self.levels]


@dataclass
class LuFactors:
    """Numeric factors P·A·Qᵀ = L·U over the plan's pattern (P = Q)."""

    plan: SymbolicPlan
    lx: np.ndarray  # data for (plan.lp, plan.li), unit diagonal implied
    ux: np.ndarray  # data for (plan.up, plan.ui)
    lrx: np.ndarray  # row-compressed mirrors for the pull-mode solves
    urx: np.ndarray
    diag: np.ndarray

    @property
    def n(self):
        return self.plan.n


def order(a: SparseMatrix) -> np.ndarray:
    """Exact minimum-degree ordering on the symmetrized pattern.

    Ties break toward the smallest original index, which keeps the result
    deterministic and reproducible across runs.
    """
    n = a.n
    adj = [set() for _ in range(n)]
    for j in range(n):
        for i in a.indices[a.indptr[j] : a.indptr[j + 1]]:
            if i != j:
                adj[i].add(j)
                adj[j].add(int(i))
    alive = np.ones(n, dtype=bool)
    heap = [(len(adj[v]), v) for v in range(n)]
    heapq.heapify(heap)
    perm = np.empty(n, dtype=np.int64)
    k = 0
    while heap:
        deg, v = heapq.heappop(heap)
        if not alive[v]:
            continue
        if deg != len(adj[v]):
            heapq.heappush(heap, (len(adj[v]), v))
            continue
        perm[k] = v
        k += 1
        alive[v] = False
        nbrs = sorted(adj[v])
        for u in nbrs:
            adj[u].discard(v)
        for idx, u in enumerate(nbrs):
            au = adj[u]
            for w in nbrs[idx + 1 :]:
                if w not in au:
                    au.add(w)
                    adj[w].add(u)
        for u in nbrs:
            heapq.heappush(heap, (len(adj[u]), u))
    return perm


def symbolic_factorize(a: SparseMatrix, perm: np.ndarray) -> SymbolicPlan:
    """Predict the factor pattern and build the elimination level schedule."""
    n = a.n
    perm = np.asarray(perm, dtype=np.int64)
    iperm = np.empty(n, dtype=np.int64)
    iperm[perm] = np.arange(n, dtype=np.int64)

    # permuted pattern of a, with a map back to a's data positions
    src_rows = a.indices
    src_cols = np.repeat(np.arange(n, dtype=np.int64), np.diff(a.indptr))
    p_rows = iperm[src_rows]
    p_cols = iperm[src_cols]
    sort = np.lexsort((p_rows, p_cols))
    ap_rows = p_rows[sort]
    ap_cols = p_cols[sort]
    ap_map = sort.astype(np.int64)
    ap_indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(ap_cols, minlength=n), out=ap_indptr[1:])
    ap_indices = ap_rows

    has_diag = np.zeros(n, dtype=bool)
    has_diag[ap_cols[ap_rows == ap_cols]] = True
    missing = np.flatnonzero(~has_diag)
    if len(missing):
        raise SingularMatrixError(int(missing[0]))

    # symmetrized strictly-lower adjacency of the permuted pattern
    lower = [set() for _ in range(n)]
    for j in range(n):
        for i in ap_indices[ap_indptr[j] : ap_indptr[j + 1]]:
            i = int(i)
            if i > j:
                lower[j].add(i)
            elif i < j:
                lower[i].add(j)

    # elimination tree (Liu) with path compression
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    upper_adj = [[] for _ in range(n)]  # per row i: columns k < i
    for j in range(n):
        for i in lower[j]:
            upper_adj[i].append(j)
    for i in range(n):
        for k in sorted(upper_adj[i]):
            r = k
            while ancestor[r] != -1 and ancestor[r] != i:
                t = ancestor[r]
                ancestor[r] = i
                r = t
            if ancestor[r] == -1:
                ancestor[r] = i
                parent[r] = i

    # symbolic factor pattern: col j of L = A-lower col j merged with the
    # patterns of j's elimination-tree children
    children = [[] for _ in range(n)]
    for c in range(n):
        if parent[c] != -1:
            children[parent[c]].append(c)
    col_pat = [None] * n
    for j in range(n):
        pat = set(lower[j])
        for c in children[j]:
            pat.update(col_pat[c])
        pat.discard(j)
        col_pat[j] = pat

    lp = np.zeros(n + 1, dtype=np.int64)
    li_parts = []
    for j in range(n):
        rows = np.array(sorted(col_pat[j]), dtype=np.int64)
        li_parts.append(rows)
        lp[j + 1] = lp[j] + len(rows)
    li = np.concatenate(li_parts) if li_parts else np.empty(0, dtype=np.int64)

    # U pattern by columns: deps(j) = {k < j : L[j,k] != 0} = row j of L,
    # ascending, with the diagonal appended last
    dep_lists = [[] for _ in range(n)]
    for k in range(n):
        for i in li[lp[k] : lp[k + 1]]:
            dep_lists[int(i)].append(k)
    up = np.zeros(n + 1, dtype=np.int64)
    ui_parts = []
    for j in range(n):
        entry = np.array(dep_lists[j] + [j], dtype=np.int64)
        ui_parts.append(entry)
        up[j + 1] = up[j] + len(entry)
    ui = np.concatenate(ui_parts)

    # levels: longest dependency path; deps all < j so one ascending pass
    level_of = np.zeros(n, dtype=np.int64)
    for j in range(n):
        deps = dep_lists[j]
        if deps:
            level_of[j] = 1 + max(level_of[k] for k in deps)
    n_levels = int(level_of.max()) + 1 if n else 0
    levels = [np.flatnonzero(level_of == l).astype(np.int64) for l in range(n_levels)]

    # row-compressed mirrors with maps into the column-compressed data
    lr_ptr, lr_cols, lr_map = _transpose_map(n, lp, li)
    strict_up = np.zeros(n + 1, dtype=np.int64)
    strict_ui_parts = []
    strict_pos_parts = []
    for j in range(n):
        strict_up[j + 1] = strict_up[j] + (up[j + 1] - up[j] - 1)
        strict_ui_parts.append(ui[up[j] : up[j + 1] - 1])
        strict_pos_parts.append(np.arange(up[j], up[j + 1] - 1, dtype=np.int64))
    strict_ui = np.concatenate(strict_ui_parts) if n else np.empty(0, dtype=np.int64)
    strict_pos = np.concatenate(strict_pos_parts) if n else np.empty(0, dtype=np.int64)
    ur_ptr, ur_cols, ur_map_local = _transpose_map(n, strict_up, strict_ui)
    ur_map = strict_pos[ur_map_local] if len(ur_map_local) else ur_map_local

    diag_pos = up[1:] - 1
    nnz_lower_sym = sum(len(s) for s in lower)
    fill = int(len(li) - nnz_lower_sym)

    return SymbolicPlan(
        n=n,
        perm=perm,
        iperm=iperm,
        parent=parent,
        lp=lp,
        li=li,
        up=up,
        ui=ui,
        levels=levels,
        level_of=level_of,
        ap_indptr=ap_indptr,
        ap_indices=ap_indices,
        ap_map=ap_map,
        src_indptr=a.indptr.copy(),
        src_indices=a.indices.copy(),
        lr_ptr=lr_ptr,
        lr_cols=lr_cols,
        lr_map=lr_map,
        ur_ptr=ur_ptr,
        ur_cols=ur_cols,
        ur_map=ur_map,
        diag_pos=diag_pos,
        fill=fill,
    )


def _transpose_map(n, indptr, indices):
    """CSC pattern -> CSR pattern plus a data-position map."""
    counts = np.bincount(indices, minlength=n) if len(indices) else np.zeros(n, dtype=np.int64)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    cols = np.empty(len(indices), dtype=np.int64)
    pos = np.empty(len(indices), dtype=np.int64)
    cursor = ptr[:-1].copy()
    for j in range(n):
        for p in range(indptr[j], indptr[j + 1]):
            i = indices[p]
            cols[cursor[i]] = j
            pos[cursor[i]] = p
            cursor[i] += 1
    return ptr, cols, pos


def _permuted_values(plan: SymbolicPlan, a: SparseMatrix):
    """Values of a aligned to the plan's permuted pattern."""
    if np.array_equal(a.indptr, plan.src_indptr) and np.array_equal(
        a.indices, plan.src_indices
    ):
        return a.data[plan.ap_map]
    # general path: a's pattern is a subset of the analyzed pattern
    n = a.n
    src_cols = np.repeat(np.arange(n, dtype=np.int64), np.diff(a.indptr))
    p_rows = plan.iperm[a.indices]
    p_cols = plan.iperm[src_cols]
    lookup = {}
    for j in range(n):
        for p in range(plan.ap_indptr[j], plan.ap_indptr[j + 1]):
            lookup[(int(plan.ap_indices[p]), j)] = p
    out = np.zeros(len(plan.ap_indices), dtype=np.float64)
    for r, c, v in zip(p_rows, p_cols, a.data):
        key = (int(r), int(c))
        if key not in lookup:
            raise ValueError("matrix pattern is not covered by the symbolic plan")
        out[lookup[key]] = v
    return out


def numeric_factorize(
    plan: SymbolicPlan, a: SparseMatrix, threads=1, pool=None, column_batches=None
) -> LuFactors:
    """Left-looking numeric factorization over the precomputed pattern.

    `column_batches` overrides the execution schedule (a list of column
    arrays executed one batch after another, each batch potentially in
    parallel). Any schedule that respects the level order produces
    bitwise-identical factors.
    """
    if np.iscomplexobj(a.data):
        raise TypeError("numeric factorization is real-valued only")
    kern = get_backend()
    n = plan.n
    ax = np.ascontiguousarray(_permuted_values(plan, a), dtype=np.float64)
    lx = np.zeros(len(plan.li), dtype=np.float64)
    ux = np.zeros(len(plan.ui), dtype=np.float64)

    if column_batches is None:
        if threads > 1 and pool is not None and n > 1:
            column_batches = plan.levels
        else:
            column_batches = [np.arange(n, dtype=np.int64)]

    if threads > 1 and pool is not None:
        works = [np.zeros(n, dtype=np.float64) for _ in range(threads)]
        for batch in column_batches:
            if len(batch) == 0:
                continue
            chunks = [c for c in np.array_split(batch, threads) if len(c)]
            futures = [
                pool.submit(
                    kern.factor_cols,
                    np.ascontiguousarray(chunk, dtype=np.int64),
                    plan.lp, plan.li, lx, plan.up, plan.ui, ux,
                    plan.ap_indptr, plan.ap_indices, ax, works[i],
                )
                for i, chunk in enumerate(chunks)
            ]
            errs = [f.result() for f in futures]
            bad = [e for e in errs if e >= 0]
            if bad:
                col = min(bad)
                raise SingularMatrixError(int(col), float(ux[plan.diag_pos[col]]))
    else:
        work = np.zeros(n, dtype=np.float64)
        for batch in column_batches:
            err = kern.factor_cols(
                np.ascontiguousarray(batch, dtype=np.int64),
                plan.lp, plan.li, lx, plan.up, plan.ui, ux,
                plan.ap_indptr, plan.ap_indices, ax, work,
            )
            if err >= 0:
                raise SingularMatrixError(int(err), float(ux[plan.diag_pos[err]]))

    lrx = lx[plan.lr_map] if len(plan.lr_map) else np.empty(0, dtype=np.float64)
    urx = ux[plan.ur_map] if len(plan.ur_map) else np.empty(0, dtype=np.float64)
    diag = ux[plan.diag_pos]
    return LuFactors(plan=plan, lx=lx, ux=ux, lrx=lrx, urx=urx, diag=diag)


def lu_solve(factors: LuFactors, rhs, threads=1, pool=None) -> np.ndarray:
    """Solve A·x = rhs using the level schedule for both sweeps."""
    kern = get_backend()
    plan = factors.plan
    n = plan.n
    x = np.ascontiguousarray(np.asarray(rhs, dtype=np.float64)[plan.perm])

    if threads > 1 and pool is not None and n > 1:
        for batch in plan.levels:
            _run_rows(pool, threads, kern.forward_rows, batch,
                      (plan.lr_ptr, plan.lr_cols, factors.lrx, x))
        for batch in reversed(plan.levels):
            _run_rows(pool, threads, kern.backward_rows, batch,
                      (plan.ur_ptr, plan.ur_cols, factors.urx, factors.diag, x))
    else:
        all_rows = np.arange(n, dtype=np.int64)
        kern.forward_rows(all_rows, plan.lr_ptr, plan.lr_cols, factors.lrx, x)
        kern.backward_rows(all_rows[::-1].copy(), plan.ur_ptr, plan.ur_cols,
                           factors.urx, factors.diag, x)

    out = np.empty(n, dtype=np.float64)
    out[plan.perm] = x
    return out


def _run_rows(pool, threads, fn, batch, args):
    if len(batch) == 0:
        return
    chunks = [c for c in np.array_split(batch, threads) if len(c)]
    futures = [
        pool.submit(fn, np.ascontiguousarray(c, dtype=np.int64), *args) for c in chunks
    ]
    for f in futures:
        f.result()


def factorize(a: SparseMatrix, threads=1, pool=None):
    """Convenience bundle: order, analyze, factorize."""
    perm = order(a)
    plan = symbolic_factorize(a, perm)
    return numeric_factorize(plan, a, threads=threads, pool=pool)
