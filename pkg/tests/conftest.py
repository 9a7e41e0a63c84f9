"""Shared, session-scoped bases: the expensive solves run once per test session."""

import numpy as np
import pytest

from resbasis import compute_basis, generate_annulus_mesh, generate_rect_mesh, scan_modes


@pytest.fixture(scope="session")
def annulus_m3():
    return scan_modes(3, 50)


@pytest.fixture(scope="session")
def annulus_m0():
    return scan_modes(0, 100)


@pytest.fixture(scope="session")
def square_bases():
    """First 10 modes on the unit square at 5x5, 10x10, 20x20 and 40x40."""
    out = {}
    for n in (5, 10, 20, 40):
        mesh = generate_rect_mesh(1.0, 1.0, n, n)
        out[n] = compute_basis(mesh, 10)
    return out


@pytest.fixture(scope="session")
def square_fine():
    """Unit square at 80x80, for properties that hold only on refined meshes."""
    return compute_basis(generate_rect_mesh(1.0, 1.0, 80, 80), 10)


@pytest.fixture(scope="session")
def annulus_fem():
    """FEM annulus basis rich enough to contain the first three m=3 pairs."""
    mesh = generate_annulus_mesh(0.1, 0.3, 16, 96)
    return compute_basis(mesh, 60)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion and print it."""

    def record(criterion, ok, detail):
        line = f"{criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[1 : s.index(":")])):
            terminalreporter.write_line(line)
