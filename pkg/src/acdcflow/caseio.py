"""Case file reading/writing and multi-area case synthesis.

The case format is a small MATPOWER-style subset: a `function mpc = NAME;`
header, scalar `mpc.baseMVA`, and bracketed numeric tables `mpc.bus`,
`mpc.gen`, `mpc.branch`, plus the DC link table `mpc.dcline`. `%` starts a
comment, tokens split on whitespace or commas, rows end at `;` or a
newline. Unknown `mpc.<section>` entries are skipped so files with extra
tables still load.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import CaseParseError
from .grid import CONTROL_CURRENT_VOLTAGE, CONTROL_POWER_VOLTAGE, LccLink, link_to_record

BUS_COLS = 13
GEN_COLS = 10
BRANCH_COLS = 11
DCLINE_COLS = 21

_CONTROL_TOKENS = (CONTROL_POWER_VOLTAGE, CONTROL_CURRENT_VOLTAGE)


@dataclass
class CaseData:
    name: str
    base_mva: float
    bus_records: np.ndarray  # (n, 13) float64
    gen_records: np.ndarray  # (m, 10) float64
    branch_records: np.ndarray  # (b, 11) float64
    dcline_records: list = field(default_factory=list)  # 21-entry rows

    @property
    def n_bus(self):
        return len(self.bus_records)


def _strip_comment(line):
    cut = line.find("%")
    return line if cut < 0 else line[:cut]


def _tokens(text):
    return text.replace(",", " ").split()


def parse_case(text, name_hint="case") -> CaseData:
    """Parse case text into raw tables (source units, unconverted)."""
    name = name_hint
    scalars = {}
    sections = {}
    current = None  # (section name, start line)
    rows = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if current is None:
            stripped = line.strip()
            if not stripped:
                continue
            m = re.match(r"function\s+mpc\s*=\s*(\w+)\s*;?\s*$", stripped)
            if m:
                name = m.group(1)
                continue
            m = re.match(r"mpc\.(\w+)\s*=\s*(.*)$", stripped)
            if not m:
                raise CaseParseError(f"unrecognized statement: {stripped!r}", line=lineno)
            key, rest = m.group(1), m.group(2).strip()
            if rest.startswith("["):
                current = (key, lineno)
                rows = []
                line = rest[1:]
                # fall through to in-section handling below
            else:
                scalars[key] = (rest.rstrip(";").strip(), lineno)
                continue
        # inside a bracketed section; a row ends at `;` or end of line
        seg = line
        end = seg.find("]")
        closed = end >= 0
        if closed:
            seg = seg[:end]
        for piece in seg.split(";"):
            toks = _tokens(piece)
            if toks:
                rows.append((toks, lineno))
        if closed:
            sections[current[0]] = rows
            current = None
    if current is not None:
        raise CaseParseError(f"section mpc.{current[0]} is never closed", line=current[1])

    if "baseMVA" not in scalars:
        raise CaseParseError("missing mpc.baseMVA")
    base_text, base_line = scalars["baseMVA"]
    try:
        base_mva = float(base_text)
    except ValueError:
        raise CaseParseError(f"bad baseMVA value {base_text!r}", line=base_line)
    if base_mva <= 0:
        raise CaseParseError("baseMVA must be positive", line=base_line)

    for required in ("bus", "gen", "branch"):
        if required not in sections:
            raise CaseParseError(f"missing required section mpc.{required}")

    bus = _numeric_table(sections["bus"], "bus", BUS_COLS)
    gen = _numeric_table(sections["gen"], "gen", GEN_COLS)
    branch = _numeric_table(sections["branch"], "branch", BRANCH_COLS)
    dcline = _dcline_table(sections.get("dcline", []))

    return CaseData(
        name=name,
        base_mva=base_mva,
        bus_records=bus,
        gen_records=gen,
        branch_records=branch,
        dcline_records=dcline,
    )


def _numeric_table(rows, section, ncols):
    out = np.zeros((len(rows), ncols), dtype=np.float64)
    for r, (toks, lineno) in enumerate(rows):
        if len(toks) < ncols:
            raise CaseParseError(
                f"{section} row has {len(toks)} columns, needs at least {ncols}",
                line=lineno,
            )
        for c in range(ncols):
            try:
                out[r, c] = float(toks[c])
            except ValueError:
                raise CaseParseError(
                    f"{section} row: bad numeric token {toks[c]!r}", line=lineno
                )
    return out


def _dcline_table(rows):
    out = []
    for toks, lineno in rows:
        if len(toks) != DCLINE_COLS:
            raise CaseParseError(
                f"dcline row has {len(toks)} columns, needs exactly {DCLINE_COLS}",
                line=lineno,
            )
        rec = []
        for c, tok in enumerate(toks):
            if c == 4:
                if tok not in _CONTROL_TOKENS:
                    raise CaseParseError(
                        f"dcline control must be one of {_CONTROL_TOKENS}, got {tok!r}",
                        line=lineno,
                    )
                rec.append(tok)
            else:
                try:
                    rec.append(float(tok))
                except ValueError:
                    raise CaseParseError(
                        f"dcline row: bad numeric token {tok!r}", line=lineno
                    )
        out.append(rec)
    return out


def parse_case_file(path) -> CaseData:
    with open(path) as fh:
        text = fh.read()
    stem = re.sub(r"\.[^.]*$", "", str(path).replace("\\", "/").rsplit("/", 1)[-1])
    return parse_case(text, name_hint=stem)


def parse_dcline_file(text) -> list:
    """Parse a link-template file: either a bare list of 21-token rows or a
    file containing an mpc.dcline section. Returns LccLink objects."""
    from .grid import link_from_record

    if "mpc.dcline" in text:
        # reuse the section machinery with a stub wrapper
        rows = None
        lines = text.splitlines()
        collecting = False
        collected = []
        start_line = 0
        for lineno, raw in enumerate(lines, start=1):
            line = _strip_comment(raw)
            if not collecting:
                m = re.search(r"mpc\.dcline\s*=\s*\[(.*)$", line)
                if m:
                    collecting = True
                    start_line = lineno
                    line = m.group(1)
                else:
                    continue
            end = line.find("]")
            closed = end >= 0
            if closed:
                line = line[:end]
            for piece in line.split(";"):
                toks = _tokens(piece)
                if toks:
                    collected.append((toks, lineno))
            if closed:
                rows = collected
                break
        if rows is None:
            raise CaseParseError("mpc.dcline section is never closed", line=start_line)
    else:
        rows = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            for piece in _strip_comment(raw).split(";"):
                toks = _tokens(piece)
                if toks:
                    rows.append((toks, lineno))
    return [link_from_record(rec) for rec in _dcline_table(rows)]


def parse_dcline_path(path) -> list:
    with open(path) as fh:
        return parse_dcline_file(fh.read())


def _fmt(v):
    if isinstance(v, str):
        return v
    f = float(v)
    if f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def write_case(case: CaseData) -> str:
    """Serialize a case; parse(write_case(parse(text))) is a fixed point."""
    out = [f"function mpc = {case.name};", "", f"mpc.baseMVA = {_fmt(case.base_mva)};", ""]

    def table(label, rows, comment):
        out.append(f"% {comment}")
        out.append(f"mpc.{label} = [")
        for row in rows:
            out.append("\t" + "\t".join(_fmt(v) for v in row) + ";")
        out.append("];")
        out.append("")

    table("bus", case.bus_records,
          "bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin")
    table("gen", case.gen_records,
          "bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin")
    table("branch", case.branch_records,
          "fbus tbus r x b rateA rateB rateC ratio angle status")
    if case.dcline_records:
        table(
            "dcline", case.dcline_records,
            "rbus ibus nbr nbi ctrl Pset Vset Iset XcR XcI Rdc tapR tapI "
            "tstep tmin tmax amin amax gmin gmax status",
        )
    return "\n".join(out)


def write_case_file(case: CaseData, path):
    with open(path, "w") as fh:
        fh.write(write_case(case))


def synthesize_multi_area(base: CaseData, copies: int, template: LccLink) -> CaseData:
    """Tile `copies` replicas of a case and chain them in a DC ring.

    Replica c shifts every bus id by c*offset where the offset is the
    next power of ten above the largest base id. Replicas beyond the
    first demote their slack bus to a PV bus (its generator stays, so
    area slack selection can promote it back). The base case's own DC
    links are dropped; `copies` new links follow the template, link c
    running from the template's rectifier bus in replica c to the
    template's inverter bus in replica (c+1) mod copies.
    """
    if copies < 1:
        raise ValueError("copies must be at least 1")
    max_id = int(base.bus_records[:, 0].max())
    offset = 10 ** len(str(max_id))

    bus_parts, gen_parts, branch_parts = [], [], []
    for c in range(copies):
        shift = c * offset
        bus = base.bus_records.copy()
        bus[:, 0] += shift
        if c > 0:
            bus[bus[:, 1] == 3.0, 1] = 2.0
        gen = base.gen_records.copy()
        gen[:, 0] += shift
        branch = base.branch_records.copy()
        branch[:, 0] += shift
        branch[:, 1] += shift
        bus_parts.append(bus)
        gen_parts.append(gen)
        branch_parts.append(branch)

    links = []
    for c in range(copies):
        rec = link_to_record(template)
        rec[0] = template.r_bus + c * offset
        rec[1] = template.i_bus + ((c + 1) % copies) * offset
        rec[20] = 1
        links.append(rec)

    return CaseData(
        name=f"{base.name}_x{copies}",
        base_mva=base.base_mva,
        bus_records=np.vstack(bus_parts),
        gen_records=np.vstack(gen_parts),
        branch_records=np.vstack(branch_parts),
        dcline_records=links,
    )


# ---------------------------------------------------------------------------
# solution serialization

STAGE_KEYS = (
    "graph_partition_ms",
    "dc_initialize_ms",
    "ac_initialize_ms",
    "lu_factorize_ms",
    "acdc_coupling_ms",
    "ac_rebuild_ms",
)

STAGE_LABELS = {
    "graph_partition_ms": "Graph Partition",
    "dc_initialize_ms": "DC Initialize",
    "ac_initialize_ms": "AC Initialize",
    "lu_factorize_ms": "LU Factorize (Total)",
    "acdc_coupling_ms": "AC/DC Coupling",
    "ac_rebuild_ms": "AC Rebuild",
}

_LINK_FIELDS = (
    "r_bus", "i_bus", "control", "v_dc_r", "v_dc_i", "i_dc", "alpha", "gamma",
    "phi_r", "phi_i", "tap_r", "tap_i", "p_r", "q_r", "p_i", "q_i",
)


@dataclass
class SolutionRecord:
    """Parsed machine-format solution."""

    meta: dict
    areas: list  # dicts: label, size, slack_bus, inner_iterations
    bus_v: dict  # bus id -> (vm_pu, va_deg)
    links: list  # dicts keyed by _LINK_FIELDS + flags
    timing: dict
    mismatch: dict  # area label -> max unscaled mismatch


def write_solution(sol, fmt="human") -> str:
    if fmt == "machine":
        return _write_machine(sol)
    if fmt == "human":
        return _write_human(sol)
    raise ValueError(f"unknown solution format {fmt!r}")


def _write_machine(sol):
    out = ["[meta]"]
    out.append(f"name = {sol.name}")
    out.append(f"status = {sol.status}")
    out.append(f"outer_iterations = {sol.outer_iterations}")
    out.append(f"backend = {sol.backend}")
    out.append(f"threads = {sol.threads}")
    out.append("[areas]")
    out.append("# label size slack_bus inner_iterations")
    for a in sol.area_reports:
        inner = ",".join(str(i) for i in a.inner_iterations) or "-"
        out.append(f"{a.label} {a.size} {a.slack_bus_id} {inner}")
    out.append("[bus]")
    out.append("# id vm_pu va_deg")
    for i, bid in enumerate(sol.bus_ids):
        out.append(f"{bid} {repr(float(sol.v_mag[i]))} {repr(float(np.rad2deg(sol.v_ang[i])))}")
    out.append("[link]")
    out.append("# " + " ".join(_LINK_FIELDS) + " flags")
    for ls in sol.links:
        vals = []
        for f in _LINK_FIELDS:
            v = getattr(ls, f)
            vals.append(v if isinstance(v, str) else (str(v) if isinstance(v, int) else repr(float(v))))
        flags = ",".join(ls.limit_flags) if ls.limit_flags else "-"
        out.append(" ".join(vals) + " " + flags)
    out.append("[timing]")
    for key in STAGE_KEYS:
        out.append(f"{key} = {sol.timing.get(key, 0.0):.3f}")
    out.append("[mismatch]")
    out.append("# area max_unscaled")
    for a in sol.area_reports:
        out.append(f"{a.label} {repr(float(a.final_mismatch))}")
    return "\n".join(out) + "\n"


def _write_human(sol):
    w = []
    w.append(f"case {sol.name}: {sol.status} after {sol.outer_iterations} outer iteration(s)")
    w.append(f"backend={sol.backend} threads={sol.threads} "
             f"ac_tol={sol.ac_tol:g} dc_tol={sol.dc_tol:g}")
    w.append("")
    w.append(f"{'area':>4} {'buses':>6} {'slack':>8} {'inner iterations':>20} {'mismatch':>12}")
    for a in sol.area_reports:
        inner = "+".join(str(i) for i in a.inner_iterations) or "-"
        w.append(f"{a.label:>4} {a.size:>6} {a.slack_bus_id:>8} {inner:>20} "
                 f"{a.final_mismatch:>12.3e}")
    if sol.links:
        w.append("")
        w.append(f"{'link':>4} {'buses':>14} {'Vdc_r kV':>10} {'Vdc_i kV':>10} "
                 f"{'Idc kA':>9} {'alpha':>8} {'gamma':>8} {'P_r MW':>9} {'P_i MW':>9}")
        for k, ls in enumerate(sol.links):
            w.append(
                f"{k:>4} {ls.r_bus:>6}-{ls.i_bus:<7} {ls.v_dc_r:>10.4f} {ls.v_dc_i:>10.4f} "
                f"{ls.i_dc:>9.6f} {ls.alpha:>8.4f} {ls.gamma:>8.4f} "
                f"{ls.p_r:>9.4f} {ls.p_i:>9.4f}"
            )
            if ls.limit_flags:
                w.append(f"     flags: {','.join(ls.limit_flags)}")
    w.append("")
    w.append("timing breakdown:")
    for key in STAGE_KEYS:
        w.append(f"  {STAGE_LABELS[key]:<22} {sol.timing.get(key, 0.0):>10.3f} ms")
    total = sum(sol.timing.get(k, 0.0) for k in STAGE_KEYS)
    w.append(f"  {'Total':<22} {total:>10.3f} ms")
    return "\n".join(w) + "\n"


def read_solution(text) -> SolutionRecord:
    """Parse machine-format solution text back into a record."""
    meta, timing, mismatch, bus_v = {}, {}, {}, {}
    areas, links = [], []
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        if section in ("meta", "timing"):
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if section == "meta":
                meta[key] = val
            else:
                timing[key] = float(val)
        elif section == "areas":
            toks = line.split()
            inner = [] if toks[3] == "-" else [int(x) for x in toks[3].split(",")]
            areas.append(
                {"label": int(toks[0]), "size": int(toks[1]),
                 "slack_bus": int(toks[2]), "inner_iterations": inner}
            )
        elif section == "bus":
            toks = line.split()
            bus_v[int(toks[0])] = (float(toks[1]), float(toks[2]))
        elif section == "link":
            toks = line.split()
            rec = {}
            for i, f in enumerate(_LINK_FIELDS):
                if f in ("r_bus", "i_bus"):
                    rec[f] = int(toks[i])
                elif f == "control":
                    rec[f] = toks[i]
                else:
                    rec[f] = float(toks[i])
            rec["flags"] = () if toks[len(_LINK_FIELDS)] == "-" else tuple(
                toks[len(_LINK_FIELDS)].split(",")
            )
            links.append(rec)
        elif section == "mismatch":
            toks = line.split()
            mismatch[int(toks[0])] = float(toks[1])
    return SolutionRecord(
        meta=meta, areas=areas, bus_v=bus_v, links=links, timing=timing,
        mismatch=mismatch,
    )
