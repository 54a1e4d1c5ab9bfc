"""Network partitioning along DC links.

Removing every DC link splits the AC network into islands that can be
solved independently. Links whose terminals land in different islands are
separating; links inside one island are embedded. Areas are numbered by
the smallest bus id they contain so labels never depend on traversal
order.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import PartitionError
from .grid import GridGraph


@dataclass
class PartitionResult:
    labels: np.ndarray  # dense bus index -> area label
    area_count: int
    areas: list  # label -> array of dense bus indices (ascending)
    separating_links: list  # positions into graph.links
    embedded_links: list
    area_slacks: list  # label -> dense index of the area's angle reference
    imbalance: float  # max area size / (n / k)
    cut_edge_count: int


def connected_components(graph: GridGraph, excluded_links=frozenset()) -> np.ndarray:
    """Component labels over in-service branches plus non-excluded links.

    Components are renumbered so the area containing the smallest bus id
    gets label 0, the next smallest unused id label 1, and so on.
    """
    n = graph.n_bus
    neighbors = [[] for _ in range(n)]
    for br in graph.branches:
        f = graph.index_of[br.from_bus]
        t = graph.index_of[br.to_bus]
        neighbors[f].append(t)
        neighbors[t].append(f)
    for pos, link in enumerate(graph.links):
        if pos in excluded_links:
            continue
        f = graph.index_of[link.r_bus]
        t = graph.index_of[link.i_bus]
        neighbors[f].append(t)
        neighbors[t].append(f)

    raw = -np.ones(n, dtype=np.int64)
    comp = 0
    for seed in range(n):
        if raw[seed] >= 0:
            continue
        queue = deque([seed])
        raw[seed] = comp
        while queue:
            u = queue.popleft()
            for v in neighbors[u]:
                if raw[v] < 0:
                    raw[v] = comp
                    queue.append(v)
        comp += 1

    # canonical labels: order components by their smallest contained bus id
    min_id = np.full(comp, np.iinfo(np.int64).max, dtype=np.int64)
    ids = graph.bus_ids()
    for i in range(n):
        c = raw[i]
        if ids[i] < min_id[c]:
            min_id[c] = ids[i]
    new_of = np.empty(comp, dtype=np.int64)
    new_of[np.argsort(min_id, kind="stable")] = np.arange(comp, dtype=np.int64)
    return new_of[raw]


def partition_by_dc(graph: GridGraph) -> PartitionResult:
    """Split the grid into AC areas by cutting every DC link."""
    labels = connected_components(graph, excluded_links=set(range(len(graph.links))))
    k = int(labels.max()) + 1 if len(labels) else 0
    areas = [np.flatnonzero(labels == a).astype(np.int64) for a in range(k)]

    separating, embedded = [], []
    for pos, link in enumerate(graph.links):
        f = graph.index_of[link.r_bus]
        t = graph.index_of[link.i_bus]
        (separating if labels[f] != labels[t] else embedded).append(pos)

    slacks = select_area_slacks(labels, graph)
    sizes = np.array([len(a) for a in areas], dtype=np.float64)
    imbalance = float(sizes.max() / (graph.n_bus / k)) if k else 0.0
    return PartitionResult(
        labels=labels,
        area_count=k,
        areas=areas,
        separating_links=separating,
        embedded_links=embedded,
        area_slacks=slacks,
        imbalance=imbalance,
        cut_edge_count=len(separating),
    )


def select_area_slacks(labels, graph: GridGraph) -> list:
    """Pick each area's angle reference bus.

    The area holding the case slack keeps it. Every other area promotes
    its largest in-service generator bus (summed Pmax; ties go to the
    smallest bus id). An area with no generator cannot be solved.
    """
    k = int(labels.max()) + 1 if len(labels) else 0
    slacks = [-1] * k
    slack_area = int(labels[graph.slack_index])
    slacks[slack_area] = graph.slack_index

    members = [[] for _ in range(k)]
    for i in range(graph.n_bus):
        members[labels[i]].append(i)

    for a in range(k):
        if slacks[a] >= 0:
            continue
        best = -1
        best_pmax = -1.0
        for i in sorted(members[a], key=lambda m: graph.buses[m].id):
            bus = graph.buses[i]
            if bus.has_gen and bus.gen_pmax > best_pmax:
                best = i
                best_pmax = bus.gen_pmax
        if best < 0:
            ids = [graph.buses[i].id for i in members[a]]
            raise PartitionError(
                f"area {a} (buses {min(ids)}..{max(ids)}) has no in-service generator"
            )
        slacks[a] = best
    return slacks
