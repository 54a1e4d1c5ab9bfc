"""Power flow for AC/DC hybrid grids.

Partitions the network into AC islands along its LCC DC links, solves each
island with a fast-decoupled power flow over a level-scheduled sparse LU,
and couples the islands through converter terminal injections in a
sequential outer loop.
"""

from .bench import BenchReport, run_bench, write_report
from .caseio import (
    CaseData,
    parse_case,
    parse_case_file,
    parse_dcline_file,
    parse_dcline_path,
    read_solution,
    synthesize_multi_area,
    write_case,
    write_case_file,
    write_solution,
)
from .coordinator import (
    HybridSolution,
    SolveOptions,
    check_convergence,
    sequential_solve,
)
from .errors import (
    AcdcflowError,
    BenchError,
    CaseParseError,
    InfeasibleLinkError,
    PartitionError,
    SingularMatrixError,
    StructuralError,
)
from .fdpf import (
    AreaState,
    DcInjection,
    FdpfOptions,
    build_bdoubleprime,
    build_bprime,
    compute_mismatch,
    fdpf_solve,
)
from .grid import (
    AdmittanceMatrix,
    Branch,
    Bus,
    GridGraph,
    LccLink,
    build_admittance,
    build_graph,
)
from .kernels import active_backend, set_backend
from .lcc import ConverterSolution, converter_injections, solve_dc_link
from .partition import PartitionResult, connected_components, partition_by_dc, select_area_slacks
from .sparselu import (
    LuFactors,
    SparseMatrix,
    SymbolicPlan,
    factorize,
    lu_solve,
    numeric_factorize,
    order,
    symbolic_factorize,
)

__version__ = "0.1.0"

__all__ = [
    "AcdcflowError",
    "AdmittanceMatrix",
    "AreaState",
    "BenchError",
    "BenchReport",
    "Branch",
    "Bus",
    "CaseData",
    "CaseParseError",
    "ConverterSolution",
    "DcInjection",
    "FdpfOptions",
    "GridGraph",
    "HybridSolution",
    "InfeasibleLinkError",
    "LccLink",
    "LuFactors",
    "PartitionError",
    "PartitionResult",
    "SingularMatrixError",
    "SolveOptions",
    "SparseMatrix",
    "StructuralError",
    "SymbolicPlan",
    "__version__",
    "active_backend",
    "build_admittance",
    "build_bdoubleprime",
    "build_bprime",
    "build_graph",
    "check_convergence",
    "compute_mismatch",
    "connected_components",
    "converter_injections",
    "factorize",
    "fdpf_solve",
    "lu_solve",
    "numeric_factorize",
    "order",
    "parse_case",
    "parse_case_file",
    "parse_dcline_file",
    "parse_dcline_path",
    "partition_by_dc",
    "read_solution",
    "run_bench",
    "select_area_slacks",
    "sequential_solve",
    "set_backend",
    "solve_dc_link",
    "symbolic_factorize",
    "synthesize_multi_area",
    "write_case",
    "write_case_file",
    "write_report",
    "write_solution",
]
