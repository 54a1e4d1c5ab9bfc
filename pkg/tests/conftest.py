import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import acceptance_report

CASE_DIR = os.path.join(os.path.dirname(__file__), "..", "cases")


def case_path(name):
    return os.path.join(CASE_DIR, name)


def two_bus_text(r=0.0, x=0.1, b=0.0, pd=100.0, qd=50.0):
    """Minimal solvable case: slack bus 1, PQ bus 2, one line."""
    return f"""function mpc = twobus;
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0    0    0 0 1 1.0 0 345 1 1.1 0.9;
    2  1  {pd} {qd} 0 0 1 1.0 0 345 1 1.1 0.9;
];
mpc.gen = [
    1  0 0 300 -300 1.0 100 1 400 0;
];
mpc.branch = [
    1 2 {r} {x} {b} 0 0 0 0 0 1;
];
"""


def two_island_text(link_row=None):
    """Two AC islands joined by one DC link: buses 1-3 and 4-5."""
    if link_row is None:
        link_row = ("4 5 4 4 P-V 100 460 0 6.8 6.8 6.2 "
                    "0.7478 0.7478 0.00855 0.7 0.8 5 60 5 60 1")
    # the link couples bus 2 (island 1) to bus 4 (island 2)
    link_row = "2 4 " + link_row.split(None, 2)[2]
    return f"""function mpc = island2;
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0  0  0 0 1 1.02 0 345 1 1.1 0.9;
    2 2 10 5  0 0 1 1.01 0 345 1 1.1 0.9;
    3 1 40 12 0 0 1 1.0  0 345 1 1.1 0.9;
    4 2 20 8  0 0 1 1.0  0 345 1 1.1 0.9;
    5 2 0  0  0 0 1 1.02 0 345 1 1.1 0.9;
];
mpc.gen = [
    1 50 0 300 -300 1.02 100 1 400 0;
    2 30 0 200 -200 1.01 100 1 250 0;
    4 10 0 150 -150 1.0  100 1 200 0;
    5 60 0 300 -300 1.02 100 1 350 0;
];
mpc.branch = [
    1 2 0.01 0.05 0.02 0 0 0 0 0 1;
    2 3 0.01 0.06 0.02 0 0 0 0 0 1;
    1 3 0.02 0.08 0.02 0 0 0 0 0 1;
    4 5 0.01 0.05 0.02 0 0 0 0 0 1;
];
mpc.dcline = [
    {link_row};
];
"""


def dense_lu_oracle(a):
    """Plain dense LU with no pivoting, for reconstruction checks."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    lo = np.eye(n)
    up = a.copy()
    for k in range(n):
        for i in range(k + 1, n):
            if up[i, k] != 0.0:
                m = up[i, k] / up[k, k]
                lo[i, k] = m
                up[i, k:] -= m * up[k, k:]
                up[i, k] = 0.0
    return lo, up


def random_dd_matrix(rng, n, density):
    """Random structurally symmetric diagonally dominant matrix."""
    mask = rng.random((n, n)) < density
    mask = np.triu(mask, 1)
    mask = mask | mask.T
    a = np.where(mask, rng.uniform(-1.0, 1.0, (n, n)), 0.0)
    a = (a + a.T) / 2.0
    np.fill_diagonal(a, np.abs(a).sum(axis=1) + rng.uniform(1.0, 2.0, n))
    return a


@pytest.fixture
def rng():
    return np.random.default_rng(77)


def pytest_terminal_summary(terminalreporter):
    if acceptance_report.lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_report.lines:
            terminalreporter.write_line(line)
