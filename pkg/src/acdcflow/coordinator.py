"""Sequential AC/DC outer loop.

The network splits into AC areas along its DC links. Each outer iteration
solves every area's fast-decoupled power flow against the latest converter
terminal demands, then re-solves every DC link at the updated terminal
voltages and exchanges the injections. Convergence needs both sides
quiet: every area mismatch under ac_tol and every converter quantity
moving less than dc_tol between consecutive outer iterations.

Stage timing covers six phases: Graph Partition, DC Initialize,
AC Initialize, LU Factorize, AC/DC Coupling, AC Rebuild. The barriered
setup phases are wall-clock; the in-loop LU/rebuild figures accumulate
per-worker busy time, so they equal wall time at one thread and aggregate
busy time above.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleLinkError
from .fdpf import (
    CONVERGED,
    DIVERGED,
    FdpfOptions,
    build_area_system,
    compute_mismatch,
    factorize_system,
    fdpf_solve,
)
from .grid import build_graph
from .kernels import active_backend
from .lcc import converter_injections, solve_dc_link
from .partition import connected_components, partition_by_dc, select_area_slacks

INFEASIBLE = "infeasible"
NOT_CONVERGED = "not_converged"

THREADS_ENV = "ACDCFLOW_THREADS"


@dataclass
class SolveOptions:
    ac_tol: float = 1e-8
    dc_tol: float = 1e-6  # mixed natural units: kV, kA, degrees
    max_outer: int = 20
    threads: int = 0  # 0 = environment override, then cpu count
    partition_enabled: bool = True
    max_inner: int = 50
    reuse_factors: bool = True

    def resolved_threads(self):
        if self.threads > 0:
            return self.threads
        env = os.environ.get(THREADS_ENV, "").strip()
        if env:
            return max(1, int(env))
        return os.cpu_count() or 1


@dataclass
class AreaReport:
    label: int
    size: int
    slack_bus_id: int
    inner_iterations: list
    final_mismatch: float = 0.0


@dataclass
class HybridSolution:
    name: str
    status: str
    bus_ids: np.ndarray
    v_mag: np.ndarray
    v_ang: np.ndarray
    links: list  # ConverterSolution per in-service link
    outer_iterations: int
    area_reports: list
    labels: np.ndarray
    area_count: int
    separating_links: list
    embedded_links: list
    imbalance: float
    timing: dict  # milliseconds, six stage keys
    ac_tol: float
    dc_tol: float
    backend: str
    threads: int
    history: list = field(default_factory=list)
    error: str = None


def check_convergence(prev, cur, area_mismatches, opts: SolveOptions) -> str:
    """Joint AC+DC convergence test between consecutive outer iterations.

    With no DC links the converter criterion is vacuous and AC convergence
    decides alone; otherwise the first outer iteration (no previous link
    sample) never converges.
    """
    areas_ok = all(m < opts.ac_tol for m in area_mismatches)
    if not areas_ok:
        return NOT_CONVERGED
    if not cur:
        return CONVERGED
    if prev is None:
        return NOT_CONVERGED
    delta = _max_link_delta(prev, cur)
    return CONVERGED if delta < opts.dc_tol else NOT_CONVERGED


def _max_link_delta(prev, cur):
    d = 0.0
    for p, c in zip(prev, cur):
        d = max(
            d,
            abs(c.v_dc_r - p.v_dc_r),
            abs(c.v_dc_i - p.v_dc_i),
            abs(c.i_dc - p.i_dc),
            abs(c.alpha - p.alpha),
            abs(c.gamma - p.gamma),
        )
    return d


@dataclass
class _SolveUnit:
    label: int
    area: np.ndarray
    slack_locals: list
    slack_bus_id: int
    ref_angles: np.ndarray = None
    cache: dict = field(default_factory=dict)
    state: object = None
    inner: list = field(default_factory=list)
    mismatch: float = np.inf
    injections: list = field(default_factory=list)


def sequential_solve(case, opts: SolveOptions = None) -> HybridSolution:
    opts = opts or SolveOptions()
    threads = opts.resolved_threads()
    graph = build_graph(case)
    timing = {k: 0.0 for k in (
        "graph_partition_ms", "dc_initialize_ms", "ac_initialize_ms",
        "lu_factorize_ms", "acdc_coupling_ms", "ac_rebuild_ms",
    )}

    # --- stage: Graph Partition -------------------------------------------
    t0 = time.perf_counter()
    if opts.partition_enabled:
        part = partition_by_dc(graph)
        labels = part.labels
        units = []
        for a in range(part.area_count):
            area = part.areas[a]
            slack_dense = part.area_slacks[a]
            slack_local = int(np.searchsorted(area, slack_dense))
            units.append(
                _SolveUnit(
                    label=a,
                    area=area,
                    slack_locals=[slack_local],
                    slack_bus_id=graph.buses[slack_dense].id,
                )
            )
        separating = part.separating_links
        embedded = part.embedded_links
        area_count = part.area_count
        imbalance = part.imbalance
    else:
        # one stacked system; electrically separate components each keep
        # their own angle reference and slack
        comp = connected_components(
            graph, excluded_links=set(range(len(graph.links)))
        )
        comp_slacks = select_area_slacks(comp, graph)
        labels = np.zeros(graph.n_bus, dtype=np.int64)
        ref = np.array(
            [graph.buses[comp_slacks[comp[i]]].v_ang for i in range(graph.n_bus)]
        )
        units = [
            _SolveUnit(
                label=0,
                area=np.arange(graph.n_bus, dtype=np.int64),
                slack_locals=[int(s) for s in comp_slacks],
                slack_bus_id=graph.buses[graph.slack_index].id,
                ref_angles=ref,
            )
        ]
        separating = []
        embedded = list(range(len(graph.links)))
        area_count = 1
        imbalance = 1.0
    timing["graph_partition_ms"] += (time.perf_counter() - t0) * 1e3

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    # inner NPC/HPC parallelism only when a single unit owns the pool;
    # multiple units parallelize across the pool instead (never nested)
    inner_threads = threads if len(units) == 1 else 1
    inner_pool = pool if len(units) == 1 else None

    unit_of_bus = {}
    fdpf_opts = FdpfOptions(
        tol=opts.ac_tol, max_iter=opts.max_inner, reuse_factors=opts.reuse_factors
    )

    def fail(status, error, links_now, outer):
        _certify(graph, units, opts)
        sol = _assemble(
            case, graph, opts, threads, units, labels, area_count,
            separating, embedded, imbalance, links_now, status, outer,
            timing, history, error,
        )
        if pool is not None:
            pool.shutdown(wait=True)
        return sol

    history = []
    try:
        # --- stage: DC Initialize -----------------------------------------
        t0 = time.perf_counter()
        try:
            link_sols = [
                solve_dc_link(
                    link,
                    1.0, graph.buses[graph.index_of[link.r_bus]].base_kv,
                    1.0, graph.buses[graph.index_of[link.i_bus]].base_kv,
                    link_id=pos,
                )
                for pos, link in enumerate(graph.links)
            ]
        except InfeasibleLinkError as exc:
            timing["dc_initialize_ms"] += (time.perf_counter() - t0) * 1e3
            return fail(INFEASIBLE, str(exc), [], 0)
        _distribute(graph, units, labels, link_sols)
        timing["dc_initialize_ms"] += (time.perf_counter() - t0) * 1e3

        # --- stage: AC Initialize -----------------------------------------
        t0 = time.perf_counter()

        def build_unit(u):
            u.cache["system"] = build_area_system(
                graph, u.area, slacks=u.slack_locals, ref_angles=u.ref_angles
            )
            return u

        if pool is not None and len(units) > 1:
            list(pool.map(build_unit, units))
        else:
            for u in units:
                build_unit(u)
        for u in units:
            for bid, li in u.cache["system"].local_of.items():
                unit_of_bus[bid] = (u, li)
        timing["ac_initialize_ms"] += (time.perf_counter() - t0) * 1e3

        # --- stage: LU Factorize (initial factorization) -------------------
        t0 = time.perf_counter()

        def factor_unit(u):
            factorize_system(u.cache["system"], threads=inner_threads, pool=inner_pool)

        if pool is not None and len(units) > 1:
            list(pool.map(factor_unit, units))
        else:
            for u in units:
                factor_unit(u)
        timing["lu_first_ms"] = (time.perf_counter() - t0) * 1e3
        timing["lu_factorize_ms"] += timing["lu_first_ms"]

        # --- outer loop -----------------------------------------------------
        status = NOT_CONVERGED
        outer = 0
        prev_sols = None
        error = None
        while outer < opts.max_outer:
            outer += 1

            def solve_unit(u):
                return fdpf_solve(
                    graph, u.area, u.injections, fdpf_opts, cache=u.cache,
                    slacks=u.slack_locals, ref_angles=u.ref_angles,
                    threads=inner_threads, pool=inner_pool, initial=u.state,
                )

            if pool is not None and len(units) > 1:
                results = list(pool.map(solve_unit, units))
            else:
                results = [solve_unit(u) for u in units]

            diverged = None
            for u, res in zip(units, results):
                u.state = res.state
                u.inner.append(res.iterations)
                u.mismatch = res.max_mismatch
                timing["lu_factorize_ms"] += (res.stats["factor_s"] + res.stats["solve_s"]) * 1e3
                timing["ac_rebuild_ms"] += (res.stats["mismatch_s"] + res.stats["build_s"]) * 1e3
                if res.status == DIVERGED and diverged is None:
                    diverged = u
            if diverged is not None:
                error = (
                    f"area {diverged.label} (slack bus {diverged.slack_bus_id}) "
                    f"diverged after {diverged.inner[-1]} inner iterations"
                )
                return fail(DIVERGED, error, prev_sols or link_sols, outer)

            # --- stage: AC/DC Coupling --------------------------------------
            t0 = time.perf_counter()
            try:
                cur_sols = []
                for pos, link in enumerate(graph.links):
                    ur, lr = unit_of_bus[link.r_bus]
                    ui_, li_ = unit_of_bus[link.i_bus]
                    cur_sols.append(
                        solve_dc_link(
                            link,
                            float(ur.state.v_mag[lr]),
                            graph.buses[graph.index_of[link.r_bus]].base_kv,
                            float(ui_.state.v_mag[li_]),
                            graph.buses[graph.index_of[link.i_bus]].base_kv,
                            link_id=pos,
                        )
                    )
            except InfeasibleLinkError as exc:
                timing["acdc_coupling_ms"] += (time.perf_counter() - t0) * 1e3
                return fail(INFEASIBLE, str(exc), prev_sols or link_sols, outer)
            _distribute(graph, units, labels, cur_sols)
            timing["acdc_coupling_ms"] += (time.perf_counter() - t0) * 1e3

            verdict = check_convergence(
                prev_sols, cur_sols, [u.mismatch for u in units], opts
            )
            history.append(
                {
                    "outer": outer,
                    "max_area_mismatch": max(u.mismatch for u in units),
                    "max_link_delta": (
                        _max_link_delta(prev_sols, cur_sols) if prev_sols else None
                    ),
                    "inner": [u.inner[-1] for u in units],
                }
            )
            link_sols = cur_sols
            prev_sols = cur_sols
            if verdict == CONVERGED:
                status = CONVERGED
                break

        if status != CONVERGED:
            error = f"outer loop hit max_outer = {opts.max_outer} without converging"
            return fail(DIVERGED, error, link_sols, outer)

        _certify(graph, units, opts)
        return _assemble(
            case, graph, opts, threads, units, labels, area_count,
            separating, embedded, imbalance, link_sols, CONVERGED, outer,
            timing, history, None,
        )
    finally:
        if pool is not None:
            pool.shutdown(wait=True)


def _distribute(graph, units, labels, link_sols):
    """Turn converter solutions into per-unit DcInjection lists."""
    per_label = {u.label: [] for u in units}
    single = len(units) == 1
    for sol in link_sols:
        rect, inv = converter_injections(sol, graph.base_mva)
        for inj in (rect, inv):
            if single:
                per_label[units[0].label].append(inj)
            else:
                per_label[int(labels[graph.index_of[inj.bus]])].append(inj)
    for u in units:
        u.injections = per_label[u.label]


def _certify(graph, units, opts):
    """Independent mismatch recomputation at the final state."""
    for u in units:
        if u.state is None:
            u.mismatch = np.inf
            continue
        _, _, norm = compute_mismatch(
            graph, u.area, u.state, u.injections, slacks=u.slack_locals
        )
        u.mismatch = norm


def _assemble(
    case, graph, opts, threads, units, labels, area_count, separating,
    embedded, imbalance, link_sols, status, outer, timing, history, error,
):
    n = graph.n_bus
    v_mag = np.full(n, np.nan)
    v_ang = np.full(n, np.nan)
    for u in units:
        if u.state is None:
            # solve failed before the first AC pass: report the flat start
            sys = u.cache.get("system")
            if sys is not None:
                v_mag[u.area] = sys.v0
                v_ang[u.area] = sys.ang0
            continue
        v_mag[u.area] = u.state.v_mag
        v_ang[u.area] = u.state.v_ang
    reports = [
        AreaReport(
            label=u.label,
            size=len(u.area),
            slack_bus_id=u.slack_bus_id,
            inner_iterations=list(u.inner),
            final_mismatch=float(u.mismatch) if np.isfinite(u.mismatch) else float("inf"),
        )
        for u in units
    ]
    return HybridSolution(
        name=case.name,
        status=status,
        bus_ids=graph.bus_ids(),
        v_mag=v_mag,
        v_ang=v_ang,
        links=list(link_sols),
        outer_iterations=outer,
        area_reports=reports,
        labels=labels,
        area_count=area_count,
        separating_links=list(separating),
        embedded_links=list(embedded),
        imbalance=imbalance,
        timing=timing,
        ac_tol=opts.ac_tol,
        dc_tol=opts.dc_tol,
        backend=active_backend(),
        threads=threads,
        history=history,
        error=error,
    )
