"""Fast-decoupled power flow for one AC area (XB scheme).

B' comes from the lossless, unit-tap, shunt-free network (phase shifts
kept) over non-slack buses; B'' from the full series model with taps,
charging, and shunts (shifts dropped) over PQ buses. Both are the negated
imaginary part of the corresponding admittance variant. The mismatch is
evaluated on the complete admittance matrix, with DC converter terminal
demands entering as extra loads.
"""

import time
from dataclasses import dataclass

import numpy as np

from .grid import PQ, PV, SLACK, assemble_ybus_coo
from .kernels import get_backend
from .sparselu import SparseMatrix, lu_solve, numeric_factorize, order, symbolic_factorize

CONVERGED = "converged"
DIVERGED = "diverged"


@dataclass
class FdpfOptions:
    tol: float = 1e-8  # p.u., checked on unscaled mismatches
    max_iter: int = 50
    reuse_factors: bool = True


@dataclass
class DcInjection:
    """Power a converter terminal draws from its AC bus (per-unit)."""

    bus: int  # original bus id
    p_dc: float
    q_dc: float  # >= 0: converters absorb reactive power at both ends


@dataclass
class AreaState:
    area: np.ndarray  # global dense bus indices
    v_mag: np.ndarray  # p.u., area-local order
    v_ang: np.ndarray  # radians
    pv: np.ndarray  # local indices
    pq: np.ndarray
    slacks: np.ndarray


@dataclass
class FdpfResult:
    state: AreaState
    status: str
    iterations: int
    history: list  # (max|dP|, max|dQ|) per evaluation point
    max_mismatch: float
    stats: dict


@dataclass
class AreaSystem:
    """Topology-fixed arrays for one area, built once and reused."""

    area: np.ndarray
    local_of: dict  # bus id -> local index
    indptr: np.ndarray  # full admittance, CSR
    indices: np.ndarray
    gv: np.ndarray
    bv: np.ndarray
    pv: np.ndarray
    pq: np.ndarray
    slacks: np.ndarray
    pvpq: np.ndarray
    p_sched: np.ndarray  # p.u., without DC terms
    q_sched: np.ndarray
    v0: np.ndarray  # flat-start magnitudes
    ang0: np.ndarray  # flat-start angles
    bp: SparseMatrix = None  # B' over pvpq
    bpp: SparseMatrix = None  # B'' over pq, None when the area has no PQ bus
    bp_plan: object = None
    bpp_plan: object = None
    bp_factors: object = None
    bpp_factors: object = None
    build_s: float = 0.0
    factor_s: float = 0.0


def _roles(graph, area, slacks):
    """Classify area buses into slack/PV/PQ local index sets."""
    area = np.asarray(list(area), dtype=np.int64)
    if slacks is None:
        slacks = [i for i, g in enumerate(area) if graph.buses[g].kind == SLACK]
    slack_set = set(int(s) for s in slacks)
    pv, pq = [], []
    for i, g in enumerate(area):
        if i in slack_set:
            continue
        if graph.buses[g].kind == PQ:
            pq.append(i)
        else:
            pv.append(i)
    return (
        area,
        np.array(sorted(slack_set), dtype=np.int64),
        np.array(pv, dtype=np.int64),
        np.array(pq, dtype=np.int64),
    )


def _reduce_coo(rows, cols, vals, keep):
    """Restrict COO triplets to keep x keep, remapping to 0..len(keep)-1."""
    n = int(rows.max()) + 1 if len(rows) else 0
    remap = -np.ones(max(n, (int(keep.max()) + 1 if len(keep) else 0)), dtype=np.int64)
    remap[keep] = np.arange(len(keep), dtype=np.int64)
    if len(rows) == 0:
        return rows, cols, vals.real.astype(np.float64)
    rr = remap[rows]
    cc = remap[cols]
    mask = (rr >= 0) & (cc >= 0)
    return rr[mask], cc[mask], vals[mask]


def build_bprime(graph, area, slacks=None):
    """B' over non-slack buses: -Im(Y) of the lossless variant."""
    area, slack_arr, pv, pq = _roles(graph, area, slacks)
    pvpq = np.array(sorted(set(pv) | set(pq)), dtype=np.int64)
    rows, cols, vals, _ = assemble_ybus_coo(
        graph, area, zero_r=True, zero_charging=True, unit_tap=True, no_shunt=True
    )
    rr, cc, vv = _reduce_coo(rows, cols, vals, pvpq)
    mat = SparseMatrix.from_coo(len(pvpq), rr, cc, np.ascontiguousarray(-vv.imag))
    return mat, pvpq


def build_bdoubleprime(graph, area, slacks=None):
    """B'' over PQ buses: -Im(Y) with taps, charging, and shunts kept."""
    area, slack_arr, pv, pq = _roles(graph, area, slacks)
    rows, cols, vals, _ = assemble_ybus_coo(graph, area, zero_shift=True)
    rr, cc, vv = _reduce_coo(rows, cols, vals, pq)
    mat = SparseMatrix.from_coo(len(pq), rr, cc, np.ascontiguousarray(-vv.imag))
    return mat, pq


def build_area_system(graph, area, slacks=None, ref_angles=None) -> AreaSystem:
    """Assemble all topology-fixed pieces for one area solve."""
    t0 = time.perf_counter()
    area, slack_arr, pv, pq = _roles(graph, area, slacks)
    pvpq = np.array(sorted(set(pv.tolist()) | set(pq.tolist())), dtype=np.int64)

    rows, cols, vals, n = assemble_ybus_coo(graph, area)
    # CSR of the full admittance for mismatch evaluation
    csr_order = np.lexsort((cols, rows)) if len(rows) else np.empty(0, dtype=np.int64)
    r_s, c_s, v_s = rows[csr_order], cols[csr_order], vals[csr_order]
    if len(r_s):
        head = np.empty(len(r_s), dtype=bool)
        head[0] = True
        head[1:] = (r_s[1:] != r_s[:-1]) | (c_s[1:] != c_s[:-1])
        starts = np.flatnonzero(head)
        v_s = np.add.reduceat(v_s, starts)
        r_s, c_s = r_s[starts], c_s[starts]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(r_s, minlength=n), out=indptr[1:])

    bp, _ = build_bprime(graph, area, slack_arr)
    bpp, _ = build_bdoubleprime(graph, area, slack_arr)

    p_sched = np.array([graph.buses[g].p_inj for g in area])
    q_sched = np.array([graph.buses[g].q_inj for g in area])
    v0 = np.array(
        [graph.buses[g].v_mag if graph.buses[g].kind in (PV, SLACK) else 1.0 for g in area]
    )
    if ref_angles is None:
        ref = graph.buses[area[slack_arr[0]]].v_ang if len(slack_arr) else 0.0
        ang0 = np.full(len(area), ref, dtype=np.float64)
    else:
        ang0 = np.asarray(ref_angles, dtype=np.float64).copy()

    sys = AreaSystem(
        area=area,
        local_of={int(graph.buses[g].id): i for i, g in enumerate(area)},
        indptr=indptr,
        indices=np.ascontiguousarray(c_s),
        gv=np.ascontiguousarray(v_s.real),
        bv=np.ascontiguousarray(v_s.imag),
        pv=pv,
        pq=pq,
        slacks=slack_arr,
        pvpq=pvpq,
        p_sched=p_sched,
        q_sched=q_sched,
        v0=v0,
        ang0=ang0,
        bp=bp if len(pvpq) else None,
        bpp=bpp if len(pq) else None,
    )
    sys.build_s = time.perf_counter() - t0
    return sys


def factorize_system(sys: AreaSystem, threads=1, pool=None):
    """Order, analyze, and factor B' and B'', caching everything."""
    t0 = time.perf_counter()
    if sys.bp is not None and sys.bp_factors is None:
        if sys.bp_plan is None:
            sys.bp_plan = symbolic_factorize(sys.bp, order(sys.bp))
        sys.bp_factors = numeric_factorize(sys.bp_plan, sys.bp, threads=threads, pool=pool)
    if sys.bpp is not None and sys.bpp_factors is None:
        if sys.bpp_plan is None:
            sys.bpp_plan = symbolic_factorize(sys.bpp, order(sys.bpp))
        sys.bpp_factors = numeric_factorize(sys.bpp_plan, sys.bpp, threads=threads, pool=pool)
    sys.factor_s += time.perf_counter() - t0


def _effective_schedule(sys: AreaSystem, dc):
    p_eff = sys.p_sched.copy()
    q_eff = sys.q_sched.copy()
    for inj in dc or ():
        li = sys.local_of.get(int(inj.bus))
        if li is None:
            continue
        p_eff[li] -= inj.p_dc
        q_eff[li] -= inj.q_dc
    return p_eff, q_eff


def _evaluate(kern, sys, vm, va, p_eff, q_eff, out_p, out_q):
    kern.power_injections(sys.indptr, sys.indices, sys.gv, sys.bv, vm, va, out_p, out_q)
    dp = p_eff - out_p
    dq = q_eff - out_q
    norm_p = float(np.max(np.abs(dp[sys.pvpq]))) if len(sys.pvpq) else 0.0
    norm_q = float(np.max(np.abs(dq[sys.pq]))) if len(sys.pq) else 0.0
    return dp, dq, norm_p, norm_q


def compute_mismatch(graph, area, state: AreaState, dc, slacks=None):
    """Scaled mismatch vectors (dP/V over non-slack, dQ/V over PQ) and the
    unscaled infinity norm. Builds everything fresh: used as the
    independent convergence certificate."""
    sys = build_area_system(graph, area, slacks=slacks)
    kern = get_backend()
    p_eff, q_eff = _effective_schedule(sys, dc)
    out_p = np.empty(len(sys.area))
    out_q = np.empty(len(sys.area))
    dp, dq, norm_p, norm_q = _evaluate(
        kern, sys, state.v_mag, state.v_ang, p_eff, q_eff, out_p, out_q
    )
    dp_scaled = dp[sys.pvpq] / state.v_mag[sys.pvpq]
    dq_scaled = dq[sys.pq] / state.v_mag[sys.pq]
    return dp_scaled, dq_scaled, max(norm_p, norm_q)


def fdpf_solve(
    graph,
    area,
    dc,
    opts: FdpfOptions = None,
    cache: dict = None,
    slacks=None,
    ref_angles=None,
    threads=1,
    pool=None,
    initial: AreaState = None,
) -> FdpfResult:
    """Solve one area to tolerance from a flat start.

    The factor cache (a dict the caller keeps per area) carries the
    assembled system and LU factors across outer iterations; with
    reuse_factors off the numeric factorization is redone every
    half-iteration, producing identical iterates since the matrices never
    change value.
    """
    opts = opts or FdpfOptions()
    kern = get_backend()
    stats = {"build_s": 0.0, "factor_s": 0.0, "solve_s": 0.0, "mismatch_s": 0.0}

    if cache is not None and "system" in cache:
        sys = cache["system"]
    else:
        sys = build_area_system(graph, area, slacks=slacks, ref_angles=ref_angles)
        stats["build_s"] += sys.build_s
        if cache is not None:
            cache["system"] = sys

    if opts.reuse_factors:
        before = sys.factor_s
        factorize_system(sys, threads=threads, pool=pool)
        stats["factor_s"] += sys.factor_s - before

    if initial is not None:
        vm = initial.v_mag.copy()
        va = initial.v_ang.copy()
    else:
        vm = sys.v0.copy()
        va = sys.ang0.copy()
    state = AreaState(
        area=sys.area, v_mag=vm, v_ang=va, pv=sys.pv, pq=sys.pq, slacks=sys.slacks
    )

    p_eff, q_eff = _effective_schedule(sys, dc)
    out_p = np.empty(len(sys.area))
    out_q = np.empty(len(sys.area))

    def bp_factors():
        if opts.reuse_factors:
            return sys.bp_factors
        t0 = time.perf_counter()
        f = numeric_factorize(sys.bp_plan, sys.bp, threads=threads, pool=pool)
        stats["factor_s"] += time.perf_counter() - t0
        return f

    def bpp_factors():
        if opts.reuse_factors:
            return sys.bpp_factors
        t0 = time.perf_counter()
        f = numeric_factorize(sys.bpp_plan, sys.bpp, threads=threads, pool=pool)
        stats["factor_s"] += time.perf_counter() - t0
        return f

    if not opts.reuse_factors:
        # plans are still topology-fixed; only numeric work repeats
        if sys.bp is not None and sys.bp_plan is None:
            sys.bp_plan = symbolic_factorize(sys.bp, order(sys.bp))
        if sys.bpp is not None and sys.bpp_plan is None:
            sys.bpp_plan = symbolic_factorize(sys.bpp, order(sys.bpp))

    t0 = time.perf_counter()
    dp, dq, norm_p, norm_q = _evaluate(kern, sys, vm, va, p_eff, q_eff, out_p, out_q)
    stats["mismatch_s"] += time.perf_counter() - t0
    history = [(norm_p, norm_q)]

    if len(sys.pvpq) == 0:
        return FdpfResult(state, CONVERGED, 0, history, max(norm_p, norm_q), stats)
    if max(norm_p, norm_q) < opts.tol:
        return FdpfResult(state, CONVERGED, 0, history, max(norm_p, norm_q), stats)

    status = DIVERGED
    iterations = opts.max_iter
    for it in range(1, opts.max_iter + 1):
        # P half: B' dtheta = dP/V
        t0 = time.perf_counter()
        rhs = dp[sys.pvpq] / vm[sys.pvpq]
        dth = lu_solve(bp_factors(), rhs, threads=threads, pool=pool)
        stats["solve_s"] += time.perf_counter() - t0
        va[sys.pvpq] += dth

        t0 = time.perf_counter()
        dp, dq, norm_p, norm_q = _evaluate(kern, sys, vm, va, p_eff, q_eff, out_p, out_q)
        stats["mismatch_s"] += time.perf_counter() - t0
        history.append((norm_p, norm_q))
        if not (np.isfinite(norm_p) and np.isfinite(norm_q)):
            iterations = it
            break
        if max(norm_p, norm_q) < opts.tol:
            status = CONVERGED
            iterations = it
            break

        # Q half: B'' dV = dQ/V; skipped when the area has no PQ bus
        if sys.bpp is not None:
            t0 = time.perf_counter()
            rhs = dq[sys.pq] / vm[sys.pq]
            dv = lu_solve(bpp_factors(), rhs, threads=threads, pool=pool)
            stats["solve_s"] += time.perf_counter() - t0
            vm[sys.pq] += dv

            t0 = time.perf_counter()
            dp, dq, norm_p, norm_q = _evaluate(
                kern, sys, vm, va, p_eff, q_eff, out_p, out_q
            )
            stats["mismatch_s"] += time.perf_counter() - t0
            history.append((norm_p, norm_q))
            if not (np.isfinite(norm_p) and np.isfinite(norm_q)):
                iterations = it
                break
            if max(norm_p, norm_q) < opts.tol:
                status = CONVERGED
                iterations = it
                break

    return FdpfResult(state, status, iterations, history, max(norm_p, norm_q), stats)
