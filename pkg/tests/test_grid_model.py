import numpy as np
import pytest

from acdcflow.caseio import parse_case, parse_case_file
from acdcflow.errors import StructuralError
from acdcflow.grid import PV, SLACK, build_admittance, build_graph

from conftest import case_path, two_bus_text


def dense_ybus_oracle(graph, area):
    """Sequential dense assembly looping over branches one at a time."""
    ids = [graph.buses[g].id for g in area]
    index = {b: i for i, b in enumerate(ids)}
    n = len(ids)
    y = np.zeros((n, n), dtype=complex)
    inside = set(ids)
    for br in graph.branches:
        if br.from_bus not in inside or br.to_bus not in inside:
            continue
        i, j = index[br.from_bus], index[br.to_bus]
        ys = 1.0 / complex(br.r, br.x)
        bc = 1j * br.b_charging / 2.0
        tap = br.tap if br.tap != 0.0 else 1.0
        t = tap * np.exp(1j * br.shift)
        y[i, i] += (ys + bc) / (tap * tap)
        y[j, j] += ys + bc
        y[i, j] += -ys / np.conj(t)
        y[j, i] += -ys / t
    for b in graph.buses:
        if b.id in inside:
            i = index[b.id]
            y[i, i] += complex(b.shunt_g, b.shunt_b)
    return y


def csc_to_dense(mat):
    out = np.zeros((mat.n, mat.n), dtype=complex)
    for j in range(mat.n):
        sl = slice(mat.indptr[j], mat.indptr[j + 1])
        out[mat.indices[sl], j] = mat.data[sl]
    return out


def test_two_bus_graph_shape():
    graph = build_graph(parse_case(two_bus_text(), "twobus"))
    assert graph.n_bus == 2
    assert len(graph.branches) == 1
    assert len(graph.links) == 0
    assert [len(a) for a in graph.adjacency] == [1, 1]
    assert graph.buses[graph.slack_index].id == 1


def test_per_unit_conversion():
    graph = build_graph(parse_case(two_bus_text(pd=123.0, qd=45.0), "twobus"))
    bus2 = graph.buses[graph.index_of[2]]
    assert bus2.p_inj == -1.23
    assert bus2.q_inj == -0.45


def test_shipped_case_builds_with_link():
    case = parse_case_file(case_path("ieee300_dc.case"))
    graph = build_graph(case)
    assert graph.n_bus == 300
    assert len(graph.links) == 1
    link = graph.links[0]
    assert link.r_bus == 119 and link.i_bus == 120
    kinds = {b.id: b.kind for b in graph.buses}
    assert kinds[7049] == SLACK
    assert kinds[119] == PV and kinds[120] == PV


def test_dangling_branch_endpoint_raises():
    text = two_bus_text().replace("1 2 0.0 0.1", "1 999 0.0 0.1")
    with pytest.raises(StructuralError) as err:
        build_graph(parse_case(text, "bad"))
    assert "999" in str(err.value)


def test_duplicate_bus_id_raises():
    text = two_bus_text().replace("2  1  100.0 50.0", "1  1  100.0 50.0")
    assert "1  1  100.0" in text
    with pytest.raises(StructuralError):
        build_graph(parse_case(text, "bad"))


def test_zero_reactance_branch_raises():
    text = two_bus_text(x=0.0)
    with pytest.raises(StructuralError):
        build_graph(parse_case(text, "bad"))


def test_single_line_admittance_closed_form():
    graph = build_graph(parse_case(two_bus_text(r=0.0, x=0.1), "twobus"))
    adm = build_admittance(graph, np.array([0, 1]))
    y = csc_to_dense(adm.matrix)
    np.testing.assert_allclose(y[0, 1].imag, 10.0, atol=1e-12)
    np.testing.assert_allclose(y[1, 0].imag, 10.0, atol=1e-12)
    np.testing.assert_allclose(y[0, 0].imag, -10.0, atol=1e-12)
    np.testing.assert_allclose(y[1, 1].imag, -10.0, atol=1e-12)


def test_tap_scaling_identity():
    flat = build_graph(parse_case(two_bus_text(r=0.0, x=0.1), "twobus"))
    text = two_bus_text(r=0.0, x=0.1).replace("0 0 0 0 0 1;", "0 0 0 2.0 0 1;")
    tapped = build_graph(parse_case(text, "tap"))
    y0 = csc_to_dense(build_admittance(flat, np.array([0, 1])).matrix)
    y1 = csc_to_dense(build_admittance(tapped, np.array([0, 1])).matrix)
    np.testing.assert_allclose(y1[0, 0], y0[0, 0] / 4.0, atol=1e-12)
    np.testing.assert_allclose(y1[0, 1], y0[0, 1] / 2.0, atol=1e-12)
    np.testing.assert_allclose(y1[1, 0], y0[1, 0] / 2.0, atol=1e-12)
    np.testing.assert_allclose(y1[1, 1], y0[1, 1], atol=1e-12)


def test_shipped_case_matches_dense_oracle():
    case = parse_case_file(case_path("ieee300_dc.case"))
    graph = build_graph(case)
    area = np.arange(graph.n_bus)
    adm = build_admittance(graph, area)
    got = csc_to_dense(adm.matrix)
    want = dense_ybus_oracle(graph, area)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_pattern_symmetry():
    case = parse_case_file(case_path("ieee300.case"))
    graph = build_graph(case)
    adm = build_admittance(graph, np.arange(graph.n_bus))
    dense = csc_to_dense(adm.matrix)
    nz = dense != 0.0
    np.testing.assert_array_equal(nz, nz.T)


def test_lossless_rows_sum_to_zero_real():
    text = two_bus_text(r=0.0, x=0.1, b=0.0)
    graph = build_graph(parse_case(text, "lossless"))
    adm = build_admittance(graph, np.array([0, 1]))
    dense = csc_to_dense(adm.matrix)
    sums = dense.sum(axis=1)
    np.testing.assert_allclose(sums.real, 0.0, atol=1e-12)


def test_out_of_service_branch_dropped():
    text = two_bus_text().replace(
        "1 2 0.0 0.1 0.0 0 0 0 0 0 1;",
        "1 2 0.0 0.1 0.0 0 0 0 0 0 1;\n    1 2 0.05 0.2 0.0 0 0 0 0 0 0;")
    graph = build_graph(parse_case(text, "open"))
    assert len(graph.branches) == 1
    assert graph.branches[0].x == 0.1


def test_gen_setpoint_defines_pv_voltage():
    case = parse_case(two_bus_text(), "twobus")
    case.gen_records[0][5] = 1.05
    graph = build_graph(case)
    assert graph.buses[graph.index_of[1]].v_mag == 1.05
