"""In-memory graph model of the hybrid grid and admittance assembly.

Buses, branches, and DC links come out of a parsed case in source units
(MW, MVAr, kV, ohms, degrees) and are converted to per-unit/radians here.
All matrices index buses by a dense internal index; original bus numbers
may be sparse and non-contiguous.
"""

from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .sparselu import SparseMatrix

PQ = 1
PV = 2
SLACK = 3

CONTROL_POWER_VOLTAGE = "P-V"
CONTROL_CURRENT_VOLTAGE = "I-V"


@dataclass
class Bus:
    id: int
    kind: int  # PQ / PV / SLACK
    base_kv: float
    v_mag: float  # p.u.; setpoint for PV/slack, case value otherwise
    v_ang: float  # radians
    p_inj: float  # p.u. scheduled injection (generation minus load)
    q_inj: float  # p.u.
    shunt_g: float  # p.u.
    shunt_b: float  # p.u.
    area: int = -1
    gen_pmax: float = 0.0  # MW, summed over in-service units
    has_gen: bool = False


@dataclass
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float
    tap: float  # off-nominal ratio on the from side, 1.0 if none
    shift: float  # radians
    status: int = 1


@dataclass
class LccLink:
    r_bus: int
    i_bus: int
    bridges_r: int
    bridges_i: int
    control: str  # CONTROL_POWER_VOLTAGE or CONTROL_CURRENT_VOLTAGE
    p_set: float  # MW at the rectifier DC terminal
    v_set: float  # kV at the inverter DC terminal
    i_set: float  # kA, used by I-V control
    xc_r: float  # ohms
    xc_i: float  # ohms
    r_dc: float  # ohms
    tap_r: float
    tap_i: float
    tap_step: float
    tap_min: float
    tap_max: float
    alpha_min: float  # degrees
    alpha_max: float
    gamma_min: float
    gamma_max: float
    status: int = 1


@dataclass
class GridGraph:
    buses: list
    branches: list  # in-service only
    links: list  # in-service only
    base_mva: float
    index_of: dict  # bus id -> dense index
    adjacency: list  # dense index -> list of branch positions
    slack_index: int  # dense index of the case slack bus
    name: str = ""

    @property
    def n_bus(self):
        return len(self.buses)

    def bus_ids(self):
        return np.array([b.id for b in self.buses], dtype=np.int64)


@dataclass
class AdmittanceMatrix:
    matrix: SparseMatrix  # complex CSC over the area's dense-local indices
    bus_ids: np.ndarray  # local dense index -> original bus id
    index_of: dict  # original bus id -> local dense index


def build_graph(case) -> GridGraph:
    """Convert parsed case records to a validated per-unit graph."""
    base = case.base_mva
    buses = []
    index_of = {}
    for rec in case.bus_records:
        bus_id = int(rec[0])
        if bus_id in index_of:
            raise StructuralError(f"duplicate bus id {bus_id}")
        kind = int(rec[1])
        if kind not in (PQ, PV, SLACK):
            raise StructuralError(f"bus {bus_id}: unsupported bus type {kind}")
        index_of[bus_id] = len(buses)
        buses.append(
            Bus(
                id=bus_id,
                kind=kind,
                base_kv=float(rec[9]),
                v_mag=float(rec[7]),
                v_ang=np.deg2rad(float(rec[8])),
                p_inj=-float(rec[2]) / base,
                q_inj=-float(rec[3]) / base,
                shunt_g=float(rec[4]) / base,
                shunt_b=float(rec[5]) / base,
            )
        )
        if buses[-1].base_kv <= 0:
            raise StructuralError(f"bus {bus_id}: base_kv must be positive")

    for pos, rec in enumerate(case.gen_records):
        bus_id = int(rec[0])
        if bus_id not in index_of:
            raise StructuralError(f"gen record {pos}: unknown bus {bus_id}")
        if int(rec[7]) == 0:
            continue
        bus = buses[index_of[bus_id]]
        bus.p_inj += float(rec[1]) / base
        bus.q_inj += float(rec[2]) / base
        bus.gen_pmax += float(rec[8])
        if not bus.has_gen and bus.kind in (PV, SLACK):
            bus.v_mag = float(rec[5])  # voltage setpoint from the first unit
        bus.has_gen = True

    branches = []
    for pos, rec in enumerate(case.branch_records):
        f, t = int(rec[0]), int(rec[1])
        for end in (f, t):
            if end not in index_of:
                raise StructuralError(f"branch record {pos}: unknown bus {end}")
        if int(rec[10]) == 0:
            continue
        x = float(rec[3])
        if x == 0.0:
            raise StructuralError(f"branch record {pos}: zero reactance in service")
        tap = float(rec[8])
        branches.append(
            Branch(
                from_bus=f,
                to_bus=t,
                r=float(rec[2]),
                x=x,
                b_charging=float(rec[4]),
                tap=tap if tap != 0.0 else 1.0,
                shift=np.deg2rad(float(rec[9])),
                status=1,
            )
        )

    links = []
    for pos, rec in enumerate(case.dcline_records):
        link = link_from_record(rec)
        for end in (link.r_bus, link.i_bus):
            if end not in index_of:
                raise StructuralError(f"dcline record {pos}: unknown bus {end}")
        if link.status == 0:
            continue
        if link.tap_min > link.tap_max or not (0 < link.tap_min):
            raise StructuralError(f"dcline record {pos}: bad tap range")
        links.append(link)

    slack_indices = [i for i, b in enumerate(buses) if b.kind == SLACK]
    if len(slack_indices) != 1:
        raise StructuralError(f"expected exactly one slack bus, found {len(slack_indices)}")

    adjacency = [[] for _ in buses]
    for pos, br in enumerate(branches):
        adjacency[index_of[br.from_bus]].append(pos)
        adjacency[index_of[br.to_bus]].append(pos)

    return GridGraph(
        buses=buses,
        branches=branches,
        links=links,
        base_mva=base,
        index_of=index_of,
        adjacency=adjacency,
        slack_index=slack_indices[0],
        name=case.name,
    )


def link_from_record(rec) -> LccLink:
    """Build an LccLink from one dcline record (source units)."""
    return LccLink(
        r_bus=int(rec[0]),
        i_bus=int(rec[1]),
        bridges_r=int(rec[2]),
        bridges_i=int(rec[3]),
        control=str(rec[4]),
        p_set=float(rec[5]),
        v_set=float(rec[6]),
        i_set=float(rec[7]),
        xc_r=float(rec[8]),
        xc_i=float(rec[9]),
        r_dc=float(rec[10]),
        tap_r=float(rec[11]),
        tap_i=float(rec[12]),
        tap_step=float(rec[13]),
        tap_min=float(rec[14]),
        tap_max=float(rec[15]),
        alpha_min=float(rec[16]),
        alpha_max=float(rec[17]),
        gamma_min=float(rec[18]),
        gamma_max=float(rec[19]),
        status=int(rec[20]),
    )


def link_to_record(link: LccLink) -> list:
    """Inverse of link_from_record."""
    return [
        link.r_bus,
        link.i_bus,
        link.bridges_r,
        link.bridges_i,
        link.control,
        link.p_set,
        link.v_set,
        link.i_set,
        link.xc_r,
        link.xc_i,
        link.r_dc,
        link.tap_r,
        link.tap_i,
        link.tap_step,
        link.tap_min,
        link.tap_max,
        link.alpha_min,
        link.alpha_max,
        link.gamma_min,
        link.gamma_max,
        link.status,
    ]


def assemble_ybus_coo(
    graph: GridGraph,
    area,
    *,
    zero_r=False,
    zero_charging=False,
    unit_tap=False,
    zero_shift=False,
    no_shunt=False,
):
    """Branch pi-model admittance terms for one area, as COO triplets.

    `area` is an iterable of dense bus indices. Local indices follow the
    order of `area`. The flags select the reduced models used for the
    decoupled iteration matrices. Assembly order is fixed (branch list
    order) so results never depend on threading or dict ordering.
    """
    area = np.asarray(list(area), dtype=np.int64)
    local_of = {int(g): i for i, g in enumerate(area)}
    n = len(area)

    rows, cols, vals = [], [], []
    for br in graph.branches:
        fi = graph.index_of[br.from_bus]
        ti = graph.index_of[br.to_bus]
        if fi not in local_of or ti not in local_of:
            continue
        f, t = local_of[fi], local_of[ti]
        r = 0.0 if zero_r else br.r
        ys = 1.0 / complex(r, br.x)
        bc = 0.0 if zero_charging else br.b_charging
        tap = 1.0 if unit_tap else br.tap
        shift = 0.0 if zero_shift else br.shift
        t_complex = tap * np.exp(1j * shift)
        yff = (ys + 0.5j * bc) / (tap * tap)
        ytt = ys + 0.5j * bc
        yft = -ys / np.conj(t_complex)
        ytf = -ys / t_complex
        rows.extend((f, f, t, t))
        cols.extend((f, t, f, t))
        vals.extend((yff, yft, ytf, ytt))

    if not no_shunt:
        for i, g in enumerate(area):
            bus = graph.buses[g]
            if bus.shunt_g != 0.0 or bus.shunt_b != 0.0:
                rows.append(i)
                cols.append(i)
                vals.append(complex(bus.shunt_g, bus.shunt_b))

    return (
        np.array(rows, dtype=np.int64),
        np.array(cols, dtype=np.int64),
        np.array(vals, dtype=np.complex128),
        n,
    )


def build_admittance(graph: GridGraph, area) -> AdmittanceMatrix:
    """Full complex admittance matrix of one AC area."""
    area = np.asarray(list(area), dtype=np.int64)
    rows, cols, vals, n = assemble_ybus_coo(graph, area)
    matrix = SparseMatrix.from_coo(n, rows, cols, vals)
    bus_ids = np.array([graph.buses[g].id for g in area], dtype=np.int64)
    index_of = {int(b): i for i, b in enumerate(bus_ids)}
    return AdmittanceMatrix(matrix=matrix, bus_ids=bus_ids, index_of=index_of)
