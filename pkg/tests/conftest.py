import numpy as np
import pytest

from bosepair import grid as G
from bosepair import hartree as H
from bosepair import pair_kernel as P


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def benchmark_run():
    """eps = 0.05 gaussian potential, M = 16, T = 1 (the Picard benchmark)."""
    grid, v = G.build_domain(1, 16, 2 * np.pi, G.PotentialSpec("gaussian", 0.05, 0.5))
    phi0 = H.gaussian_datum(grid, 0.8)
    tr = H.hartree_evolve(grid, phi0, v, 0.01, 100)
    gm = P.build_g_m(grid, tr.phi, v)
    history = []
    pair = P.picard_solve(grid, tr.t, gm, tol=1e-10,
                          callback=lambda it, k, Sk, a: history.append((it, k, Sk, a)))
    return dict(grid=grid, v=v, tr=tr, gm=gm, pair=pair, iterates=history)


ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Collect one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def record(number, title, passed, detail):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
