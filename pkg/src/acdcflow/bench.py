"""Benchmark harness: thread sweeps with a determinism gate.

Every configuration re-solves the same case; any run whose state vectors
differ bitwise from the backend's first run aborts the report, so timings
of wrong answers are never published. Best and mean of the repeats are
both reported.
"""

import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .coordinator import SolveOptions, sequential_solve
from .errors import BenchError
from .fdpf import CONVERGED
from .kernels import active_backend, set_backend

STAGE_KEYS = (
    "graph_partition_ms",
    "dc_initialize_ms",
    "ac_initialize_ms",
    "lu_factorize_ms",
    "acdc_coupling_ms",
    "ac_rebuild_ms",
)


@dataclass
class BenchRun:
    total_ms: float
    timing: dict
    outer: int
    inner: list


@dataclass
class BenchRow:
    backend: str
    threads: int
    best_ms: float
    mean_ms: float
    runs: list
    first_build_ms: float  # B'/B'' assembly, best run
    first_lu_ms: float  # initial factorization, best run


@dataclass
class BenchReport:
    case_name: str
    n_bus: int
    n_link: int
    area_count: int
    machine: str
    repeat: int
    rows: list = field(default_factory=list)


def machine_descriptor():
    import numpy

    return (
        f"{platform.platform()}; python {platform.python_version()}; "
        f"numpy {numpy.__version__}; cpus {os_cpu_count()}"
    )


def os_cpu_count():
    import os

    return os.cpu_count() or 1


def run_bench(case, threads_list, repeat, backends=None, base_opts=None) -> BenchReport:
    """Sweep thread counts (and optionally backends) over one case."""
    if repeat < 1:
        raise BenchError("repeat must be at least 1")
    if not threads_list:
        raise BenchError("need at least one thread count")
    backends = list(backends) if backends else [active_backend()]

    report = BenchReport(
        case_name=case.name, n_bus=case.n_bus, n_link=len(case.dcline_records),
        area_count=0, machine=machine_descriptor(), repeat=repeat,
    )
    prev_backend = active_backend()
    try:
        for backend in backends:
            set_backend(backend)
            reference = None
            for threads in threads_list:
                runs = []
                sols = []
                for _ in range(repeat):
                    opts = _opts_with(base_opts, threads)
                    t0 = time.perf_counter()
                    sol = sequential_solve(case, opts)
                    total = (time.perf_counter() - t0) * 1e3
                    if sol.status != CONVERGED:
                        raise BenchError(
                            f"{case.name} failed to converge at backend={backend} "
                            f"threads={threads}: {sol.status}"
                        )
                    runs.append(
                        BenchRun(
                            total_ms=total,
                            timing=dict(sol.timing),
                            outer=sol.outer_iterations,
                            inner=[a.inner_iterations for a in sol.area_reports],
                        )
                    )
                    sols.append(sol)
                    report.area_count = sol.area_count
                for sol in sols:
                    if reference is None:
                        reference = (sol.v_mag.copy(), sol.v_ang.copy())
                    elif not (
                        np.array_equal(sol.v_mag, reference[0])
                        and np.array_equal(sol.v_ang, reference[1])
                    ):
                        raise BenchError(
                            f"determinism violation: backend={backend} "
                            f"threads={threads} produced a different state than "
                            f"the backend's reference run"
                        )
                totals = [r.total_ms for r in runs]
                best = runs[int(np.argmin(totals))]
                report.rows.append(
                    BenchRow(
                        backend=backend,
                        threads=threads,
                        best_ms=float(min(totals)),
                        mean_ms=float(np.mean(totals)),
                        runs=runs,
                        first_build_ms=best.timing.get("ac_initialize_ms", 0.0),
                        first_lu_ms=best.timing.get("lu_first_ms", 0.0),
                    )
                )
    finally:
        set_backend(prev_backend)
    return report


def _opts_with(base_opts, threads):
    if base_opts is None:
        return SolveOptions(threads=threads)
    return SolveOptions(
        ac_tol=base_opts.ac_tol,
        dc_tol=base_opts.dc_tol,
        max_outer=base_opts.max_outer,
        threads=threads,
        partition_enabled=base_opts.partition_enabled,
        max_inner=base_opts.max_inner,
        reuse_factors=base_opts.reuse_factors,
    )


def write_report(report: BenchReport) -> str:
    out = ["[bench]"]
    out.append(f"case = {report.case_name}")
    out.append(f"buses = {report.n_bus}")
    out.append(f"links = {report.n_link}")
    out.append(f"areas = {report.area_count}")
    out.append(f"repeat = {report.repeat}")
    out.append(f"machine = {report.machine}")
    for row in report.rows:
        out.append("[row]")
        out.append(f"backend = {row.backend}")
        out.append(f"threads = {row.threads}")
        out.append(f"best_ms = {row.best_ms:.3f}")
        out.append(f"mean_ms = {row.mean_ms:.3f}")
        out.append(f"runs_ms = {','.join(f'{r.total_ms:.3f}' for r in row.runs)}")
        out.append(f"outer = {row.runs[0].outer}")
        out.append(f"first_build_ms = {row.first_build_ms:.3f}")
        out.append(f"first_lu_ms = {row.first_lu_ms:.3f}")
        best = row.runs[int(np.argmin([r.total_ms for r in row.runs]))]
        for key in STAGE_KEYS:
            out.append(f"{key} = {best.timing.get(key, 0.0):.3f}")
    return "\n".join(out) + "\n"
