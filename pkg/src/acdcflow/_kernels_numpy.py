"""Pure-numpy kernel backend.

Floating-point accumulation order matches the jit backend: strictly
ascending within each column or row segment.
"""

import numpy as np

PIVOT_TOL = 1e-12


def factor_cols(cols, lp, li, lx, up, ui, ux, ap, ai, ax, w):
    """Left-looking factorization of the given columns. Returns the first
    column with a failed pivot, or -1."""
    for j in cols:
        j = int(j)
        w[ai[ap[j] : ap[j + 1]]] = ax[ap[j] : ap[j + 1]]
        for p in range(up[j], up[j + 1] - 1):
            k = int(ui[p])
            ukj = w[k]
            ux[p] = ukj
            if ukj != 0.0:
                sl = slice(lp[k], lp[k + 1])
                w[li[sl]] -= lx[sl] * ukj
        pivot = w[j]
        ux[up[j + 1] - 1] = pivot
        if abs(pivot) <= PIVOT_TOL:
            return j
        inv = 1.0 / pivot
        sl = slice(lp[j], lp[j + 1])
        rows = li[sl]
        lx[sl] = w[rows] * inv
        w[rows] = 0.0
        w[ui[up[j] : up[j + 1]]] = 0.0
    return -1


def forward_rows(rows, rp, rc, rx, x):
    """Unit-lower triangular sweep, pull form: x[i] -= L[i,:i] . x[:i]."""
    for i in rows:
        i = int(i)
        p0, p1 = rp[i], rp[i + 1]
        if p1 > p0:
            x[i] -= np.dot(rx[p0:p1], x[rc[p0:p1]])


def backward_rows(rows, rp, rc, rx, diag, x):
    """Upper triangular sweep, pull form: x[j] = (x[j] - U[j,j+1:] . x) / U[j,j]."""
    for j in rows:
        j = int(j)
        p0, p1 = rp[j], rp[j + 1]
        if p1 > p0:
            x[j] = (x[j] - np.dot(rx[p0:p1], x[rc[p0:p1]])) / diag[j]
        else:
            x[j] = x[j] / diag[j]


def power_injections(indptr, indices, gv, bv, vm, va, out_p, out_q):
    """Net injections P_i, Q_i from the admittance matrix in CSR form."""
    n = len(out_p)
    nnz = len(indices)
    if nnz == 0:
        out_p[:] = 0.0
        out_q[:] = 0.0
        return
    row = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    dth = va[row] - va[indices]
    c = np.cos(dth)
    s = np.sin(dth)
    vj = vm[indices]
    tp = vj * (gv * c + bv * s)
    tq = vj * (gv * s - bv * c)
    out_p[:] = vm * np.bincount(row, weights=tp, minlength=n)
    out_q[:] = vm * np.bincount(row, weights=tq, minlength=n)
