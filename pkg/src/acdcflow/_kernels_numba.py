"""Jit-compiled kernel backend.

Same floating-point operation order as the numpy backend: per column the
dependency updates apply in ascending column order, and every inner
accumulation runs strictly left to right. nogil lets the thread pool run
kernels concurrently; no fastmath, no reduction reordering.
"""

import math

from numba import njit

PIVOT_TOL = 1e-12


@njit(cache=True, nogil=True)
def factor_cols(cols, lp, li, lx, up, ui, ux, ap, ai, ax, w):
    for cidx in range(len(cols)):
        j = cols[cidx]
        for p in range(ap[j], ap[j + 1]):
            w[ai[p]] = ax[p]
        for p in range(up[j], up[j + 1] - 1):
            k = ui[p]
            ukj = w[k]
            ux[p] = ukj
            if ukj != 0.0:
                for q in range(lp[k], lp[k + 1]):
                    w[li[q]] -= lx[q] * ukj
        pivot = w[j]
        ux[up[j + 1] - 1] = pivot
        if abs(pivot) <= PIVOT_TOL:
            return j
        inv = 1.0 / pivot
        for q in range(lp[j], lp[j + 1]):
            i = li[q]
            lx[q] = w[i] * inv
            w[i] = 0.0
        for p in range(up[j], up[j + 1]):
            w[ui[p]] = 0.0
    return -1


@njit(cache=True, nogil=True)
def forward_rows(rows, rp, rc, rx, x):
    for ridx in range(len(rows)):
        i = rows[ridx]
        s = 0.0
        for p in range(rp[i], rp[i + 1]):
            s += rx[p] * x[rc[p]]
        x[i] -= s


@njit(cache=True, nogil=True)
def backward_rows(rows, rp, rc, rx, diag, x):
    for ridx in range(len(rows)):
        j = rows[ridx]
        s = 0.0
        for p in range(rp[j], rp[j + 1]):
            s += rx[p] * x[rc[p]]
        x[j] = (x[j] - s) / diag[j]


@njit(cache=True, nogil=True)
def power_injections(indptr, indices, gv, bv, vm, va, out_p, out_q):
    n = len(out_p)
    for i in range(n):
        vai = va[i]
        sp = 0.0
        sq = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            dth = vai - va[j]
            c = math.cos(dth)
            s = math.sin(dth)
            vj = vm[j]
            sp += vj * (gv[p] * c + bv[p] * s)
            sq += vj * (gv[p] * s - bv[p] * c)
        out_p[i] = vm[i] * sp
        out_q[i] = vm[i] * sq
