"""Command-line interface.

Exit codes: 0 success, 2 usage or input error, 3 solver non-convergence
or benchmark failure, 4 validation mismatch. Failures print one
machine-parsable line to stderr: `error: category=<Kind> <detail>`.
"""

import argparse
import sys

import numpy as np

from .bench import run_bench, write_report
from .caseio import (
    parse_case_file,
    parse_dcline_path,
    read_solution,
    synthesize_multi_area,
    write_case_file,
    write_solution,
)
from .coordinator import SolveOptions, sequential_solve
from .errors import AcdcflowError, BenchError, CaseParseError, PartitionError, StructuralError
from .fdpf import CONVERGED
from .grid import build_graph
from .partition import partition_by_dc


def _err(exc_or_category, detail=""):
    if isinstance(exc_or_category, BaseException):
        category = type(exc_or_category).__name__
        detail = str(exc_or_category)
    else:
        category = exc_or_category
    print(f"error: category={category} {detail}", file=sys.stderr)


def build_parser():
    p = argparse.ArgumentParser(
        prog="acdcflow",
        description="AC/DC hybrid grid power flow: partitioned fast-decoupled "
        "solves coupled through LCC converter links.",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="solve a case and print the solution")
    s.add_argument("case")
    s.add_argument("--threads", type=int, default=0, help="worker threads (0 = auto)")
    s.add_argument("--tol", type=float, default=1e-8, help="AC mismatch tolerance, p.u.")
    s.add_argument("--max-outer", type=int, default=20)
    s.add_argument("--no-partition", action="store_true",
                   help="solve the whole network as one stacked system")
    s.add_argument("--out", help="write the solution to this file instead of stdout")
    s.add_argument("--format", choices=("human", "machine"), default="human")

    s = sub.add_parser("partition", help="print the DC-link partition of a case")
    s.add_argument("case")

    s = sub.add_parser("gen", help="synthesize a multi-area case from a base case")
    s.add_argument("base")
    s.add_argument("--copies", type=int, required=True)
    s.add_argument("--link-template", required=True,
                   help="dcline file whose first record is the ring link template")
    s.add_argument("--out", required=True)

    s = sub.add_parser("bench", help="benchmark a case over a thread sweep")
    s.add_argument("case")
    s.add_argument("--threads", default="1,2,4,8", help="comma-separated thread counts")
    s.add_argument("--repeat", type=int, default=3)
    s.add_argument("--backend", default="",
                   help="comma-separated kernel backends (default: active backend)")
    s.add_argument("--out", help="write the report to this file as well")

    s = sub.add_parser("validate", help="solve a case and compare to a stored solution")
    s.add_argument("case")
    s.add_argument("--expect", required=True, help="machine-format solution file")
    s.add_argument("--vtol", type=float, default=1e-3, help="magnitude tolerance, p.u.")
    s.add_argument("--atol", type=float, default=0.05, help="angle tolerance, degrees")
    s.add_argument("--threads", type=int, default=0)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.cmd == "solve":
            return _cmd_solve(args)
        if args.cmd == "partition":
            return _cmd_partition(args)
        if args.cmd == "gen":
            return _cmd_gen(args)
        if args.cmd == "bench":
            return _cmd_bench(args)
        if args.cmd == "validate":
            return _cmd_validate(args)
        parser.error(f"unknown subcommand {args.cmd!r}")
    except (CaseParseError, StructuralError, PartitionError) as exc:
        _err(exc)
        return 2
    except FileNotFoundError as exc:
        _err("FileNotFound", str(exc))
        return 2
    except BenchError as exc:
        _err(exc)
        return 3
    except AcdcflowError as exc:
        _err(exc)
        return 3
    return 2


def _cmd_solve(args):
    case = parse_case_file(args.case)
    opts = SolveOptions(
        ac_tol=args.tol,
        max_outer=args.max_outer,
        threads=args.threads,
        partition_enabled=not args.no_partition,
    )
    sol = sequential_solve(case, opts)
    text = write_solution(sol, fmt=args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if sol.status != CONVERGED:
        _err("NonConvergence", f"status={sol.status} {sol.error or ''}".strip())
        return 3
    return 0


def _cmd_partition(args):
    case = parse_case_file(args.case)
    graph = build_graph(case)
    part = partition_by_dc(graph)
    print(f"case {case.name}: {part.area_count} area(s), "
          f"imbalance {part.imbalance:.4f}, "
          f"{len(part.separating_links)} separating / "
          f"{len(part.embedded_links)} embedded link(s)")
    for a in range(part.area_count):
        slack = graph.buses[part.area_slacks[a]].id
        print(f"  area {a}: {len(part.areas[a])} buses, slack bus {slack}")
    return 0


def _cmd_gen(args):
    base = parse_case_file(args.base)
    links = parse_dcline_path(args.link_template)
    if not links:
        _err("CaseParseError", "link template file holds no dcline record")
        return 2
    if args.copies < 1:
        _err("Usage", "--copies must be at least 1")
        return 2
    out_case = synthesize_multi_area(base, args.copies, links[0])
    write_case_file(out_case, args.out)
    print(f"wrote {out_case.name}: {out_case.n_bus} buses, "
          f"{len(out_case.dcline_records)} dc link(s) -> {args.out}")
    return 0


def _cmd_bench(args):
    case = parse_case_file(args.case)
    try:
        threads_list = [int(t) for t in args.threads.split(",") if t.strip()]
    except ValueError:
        _err("Usage", f"bad --threads list {args.threads!r}")
        return 2
    backends = [b.strip() for b in args.backend.split(",") if b.strip()] or None
    report = run_bench(case, threads_list, args.repeat, backends=backends)
    text = write_report(report)
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def _cmd_validate(args):
    case = parse_case_file(args.case)
    with open(args.expect) as fh:
        expect = read_solution(fh.read())
    sol = sequential_solve(case, SolveOptions(threads=args.threads))
    if sol.status != CONVERGED:
        _err("NonConvergence", f"status={sol.status} {sol.error or ''}".strip())
        return 3

    index_of = {int(b): i for i, b in enumerate(sol.bus_ids)}
    slack_of_area = {r.label: r.slack_bus_id for r in sol.area_reports}
    va_deg = np.rad2deg(sol.v_ang)

    failures = []
    for bid, (vm_e, va_e) in expect.bus_v.items():
        if bid not in index_of:
            failures.append(f"bus {bid}: present in expectation, absent from case")
            continue
        i = index_of[bid]
        dv = abs(float(sol.v_mag[i]) - vm_e)
        if dv > args.vtol:
            failures.append(f"bus {bid}: |V| off by {dv:.3e} p.u. (tol {args.vtol:g})")
        # angles compared against the same reference: the bus's area slack
        label = int(sol.labels[i])
        slack_bid = slack_of_area.get(label)
        if slack_bid is not None and slack_bid in expect.bus_v and slack_bid in index_of:
            rel_sol = float(va_deg[i] - va_deg[index_of[slack_bid]])
            rel_exp = va_e - expect.bus_v[slack_bid][1]
            da = abs(rel_sol - rel_exp)
            if da > args.atol:
                failures.append(
                    f"bus {bid}: angle off by {da:.3e} deg relative to slack "
                    f"{slack_bid} (tol {args.atol:g})"
                )
    for k, exp_link in enumerate(expect.links):
        if k >= len(sol.links):
            failures.append(f"link {k}: missing from solution")
            continue
        got = sol.links[k]
        if got.r_bus != exp_link["r_bus"] or got.i_bus != exp_link["i_bus"]:
            failures.append(f"link {k}: endpoint mismatch")
            continue
        for fldname in ("alpha", "gamma"):
            d = abs(getattr(got, fldname) - exp_link[fldname])
            if d > args.atol:
                failures.append(
                    f"link {k}: {fldname} off by {d:.3e} deg (tol {args.atol:g})"
                )

    if failures:
        for f in failures:
            print(f"validate: {f}")
        _err("ValidationMismatch", f"{len(failures)} quantity(ies) out of tolerance")
        return 4
    print(f"validate: ok ({len(expect.bus_v)} buses, {len(expect.links)} links checked)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
