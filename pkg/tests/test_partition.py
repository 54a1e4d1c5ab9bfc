import numpy as np
import pytest

from acdcflow.caseio import parse_case, parse_case_file, parse_dcline_path, synthesize_multi_area
from acdcflow.errors import PartitionError
from acdcflow.grid import build_graph
from acdcflow.partition import connected_components, partition_by_dc

from conftest import case_path, two_bus_text, two_island_text


def bfs_component_oracle(graph, excluded_links):
    """Plain python BFS used to double-check component labels."""
    n = graph.n_bus
    adj = [[] for _ in range(n)]
    for br in graph.branches:
        i, j = graph.index_of[br.from_bus], graph.index_of[br.to_bus]
        adj[i].append(j)
        adj[j].append(i)
    for pos, link in enumerate(graph.links):
        if pos in excluded_links:
            continue
        i, j = graph.index_of[link.r_bus], graph.index_of[link.i_bus]
        adj[i].append(j)
        adj[j].append(i)
    seen = [-1] * n
    comp = 0
    for s in range(n):
        if seen[s] >= 0:
            continue
        stack = [s]
        seen[s] = comp
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if seen[w] < 0:
                    seen[w] = comp
                    stack.append(w)
        comp += 1
    return np.array(seen), comp


def test_single_bus_single_component():
    text = """function mpc = one;
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0 0 0 0 1 1.0 0 345 1 1.1 0.9;
];
mpc.gen = [
    1 0 0 300 -300 1.0 100 1 400 0;
];
mpc.branch = [
];
"""
    graph = build_graph(parse_case(text, "one"))
    labels = connected_components(graph)
    np.testing.assert_array_equal(labels, [0])


def test_link_exclusion_splits_two_islands():
    graph = build_graph(parse_case(two_island_text(), "island2"))
    joined = connected_components(graph)
    assert joined.max() == 0
    split = connected_components(graph, excluded_links={0})
    assert split.max() == 1
    # island membership: buses 1-3 vs 4-5
    idx = graph.index_of
    assert split[idx[1]] == split[idx[2]] == split[idx[3]]
    assert split[idx[4]] == split[idx[5]]
    assert split[idx[1]] != split[idx[4]]


def test_embedded_link_with_parallel_ac_path():
    # link terminals stay AC-connected through bus 3 (Fig-5-style shape)
    text = two_island_text().replace(
        "    4 5 0.01 0.05 0.02 0 0 0 0 0 1;",
        "    4 5 0.01 0.05 0.02 0 0 0 0 0 1;\n    3 4 0.02 0.07 0.02 0 0 0 0 0 1;")
    graph = build_graph(parse_case(text, "bridged"))
    labels = connected_components(graph, excluded_links={0})
    assert labels.max() == 0
    part = partition_by_dc(graph)
    assert part.area_count == 1
    assert part.embedded_links == [0]
    assert part.separating_links == []


def test_three_copy_partition_shape():
    base = parse_case_file(case_path("ieee300_dc.case"))
    template = parse_dcline_path(case_path("link_default.dcline"))[0]
    multi = synthesize_multi_area(base, 3, template)
    part = partition_by_dc(build_graph(multi))
    assert part.area_count == 3
    assert len(part.separating_links) == 3
    assert part.embedded_links == []
    assert part.imbalance == 1.0
    assert part.cut_edge_count == 3
    sizes = [len(a) for a in part.areas]
    assert sizes == [300, 300, 300]


def test_shipped_case_link_is_embedded():
    graph = build_graph(parse_case_file(case_path("ieee300_dc.case")))
    part = partition_by_dc(graph)
    assert part.area_count == 1
    assert part.embedded_links == [0]
    assert part.separating_links == []


def test_labels_are_canonical_by_smallest_bus_id():
    graph = build_graph(parse_case(two_island_text(), "island2"))
    part = partition_by_dc(graph)
    # area 0 must contain the smallest bus id overall
    ids0 = {graph.buses[i].id for i in part.areas[0]}
    assert 1 in ids0
    # area numbering follows ascending smallest-member id
    mins = [min(graph.buses[i].id for i in area) for area in part.areas]
    assert mins == sorted(mins)


def test_partition_matches_bfs_oracle_on_shipped_case():
    graph = build_graph(parse_case_file(case_path("ieee300_dc.case")))
    labels = connected_components(graph, excluded_links={0})
    oracle, count = bfs_component_oracle(graph, {0})
    assert labels.max() + 1 == count
    # same partition up to relabeling: label pairs must be consistent
    mapping = {}
    for a, b in zip(labels, oracle):
        assert mapping.setdefault(int(a), int(b)) == int(b)


def test_area_slack_selection_rule():
    # area 2 capacities {100, 300, 300} at buses {7, 3, 9} -> bus 3 wins
    text = """function mpc = pick;
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0  0 0 0 1 1.0 0 345 1 1.1 0.9;
    2 1 10 4 0 0 1 1.0 0 345 1 1.1 0.9;
    3 2 0  0 0 0 1 1.0 0 345 1 1.1 0.9;
    7 2 0  0 0 0 1 1.0 0 345 1 1.1 0.9;
    9 2 0  0 0 0 1 1.0 0 345 1 1.1 0.9;
    8 1 20 8 0 0 1 1.0 0 345 1 1.1 0.9;
];
mpc.gen = [
    1 30 0 300 -300 1.0 100 1 500 0;
    3 20 0 200 -200 1.0 100 1 300 0;
    7 10 0 100 -100 1.0 100 1 100 0;
    9 20 0 200 -200 1.0 100 1 300 0;
];
mpc.branch = [
    1 2 0.01 0.05 0 0 0 0 0 0 1;
    3 7 0.01 0.05 0 0 0 0 0 0 1;
    7 9 0.01 0.05 0 0 0 0 0 0 1;
    3 8 0.01 0.05 0 0 0 0 0 0 1;
];
mpc.dcline = [
    2 8 4 4 P-V 100 460 0 6.8 6.8 6.2 0.7478 0.7478 0.00855 0.7 0.8 15 20 18 20 1;
];
"""
    graph = build_graph(parse_case(text, "pick"))
    part = partition_by_dc(graph)
    assert part.area_count == 2
    slack_ids = [graph.buses[i].id for i in part.area_slacks]
    assert slack_ids[0] == 1          # original slack kept in its area
    assert slack_ids[1] == 3          # largest capacity, smallest id tie-break


def test_single_area_keeps_original_slack():
    graph = build_graph(parse_case(two_bus_text(), "twobus"))
    part = partition_by_dc(graph)
    assert part.area_count == 1
    assert graph.buses[part.area_slacks[0]].id == 1


def test_copy_slacks_are_reselected():
    base = parse_case_file(case_path("ieee300_dc.case"))
    template = parse_dcline_path(case_path("link_default.dcline"))[0]
    multi = synthesize_multi_area(base, 3, template)
    graph = build_graph(multi)
    part = partition_by_dc(graph)
    slack_ids = sorted(graph.buses[i].id for i in part.area_slacks)
    assert slack_ids == [7049, 17049, 27049]


def test_generatorless_area_raises():
    text = two_island_text()
    # strip the island-2 generators (buses 4 and 5)
    lines = [ln for ln in text.splitlines()
             if not ln.strip().startswith(("4 10", "5 60"))]
    graph = build_graph(parse_case("\n".join(lines), "nogen"))
    with pytest.raises(PartitionError) as err:
        partition_by_dc(graph)
    assert "area" in str(err.value)


def test_labels_cover_every_bus_once():
    graph = build_graph(parse_case_file(case_path("ieee300_dc.case")))
    part = partition_by_dc(graph)
    seen = np.concatenate(part.areas)
    assert len(seen) == graph.n_bus
    assert len(np.unique(seen)) == graph.n_bus


def test_exclusion_monotonicity_randomized(rng):
    # random multi-ring graph with several links; nested exclusions never merge
    n = 60
    bus_rows = ["    1 3 0 0 0 0 1 1.0 0 345 1 1.1 0.9;"]
    for b in range(2, n + 1):
        bus_rows.append(f"    {b} 1 5 2 0 0 1 1.0 0 345 1 1.1 0.9;")
    branch_rows = []
    for b in range(2, n + 1):
        if rng.random() < 0.85:
            branch_rows.append(f"    {b} {b - 1} 0.01 0.05 0 0 0 0 0 0 1;")
    for _ in range(15):
        a, b = rng.integers(1, n + 1, size=2)
        if a != b:
            branch_rows.append(f"    {a} {b} 0.01 0.05 0 0 0 0 0 0 1;")
    link_rows = []
    for _ in range(8):
        a, b = rng.integers(1, n + 1, size=2)
        if a != b:
            link_rows.append(
                f"    {a} {b} 4 4 P-V 100 460 0 6.8 6.8 6.2 "
                f"0.7478 0.7478 0.00855 0.7 0.8 15 20 18 20 1;")
    text = (
        "function mpc = rnd;\nmpc.baseMVA = 100;\nmpc.bus = [\n"
        + "\n".join(bus_rows) + "\n];\nmpc.gen = [\n"
        + "    1 0 0 300 -300 1.0 100 1 400 0;\n];\nmpc.branch = [\n"
        + "\n".join(branch_rows) + "\n];\nmpc.dcline = [\n"
        + "\n".join(link_rows) + "\n];\n")
    graph = build_graph(parse_case(text, "rnd"))
    n_links = len(graph.links)
    for _ in range(40):
        small = {int(i) for i in rng.integers(0, n_links, size=3)}
        extra = {int(i) for i in rng.integers(0, n_links, size=3)}
        large = small | extra
        c_small = connected_components(graph, excluded_links=small).max() + 1
        c_large = connected_components(graph, excluded_links=large).max() + 1
        assert c_large >= c_small
