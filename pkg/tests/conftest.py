import re

import numpy as np
import pytest

from qliang import core
from qliang.core import DensityMatrix, SiteRegistry


def random_density(rng, dim, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (g + g.conj().T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def abc():
    return SiteRegistry.qubits("ABC")


@pytest.fixture
def mixed_mixed_pure(abc):
    """I/2 (A) x I/2 (B) x |0><0| (C)."""
    mm, p0 = core.maximally_mixed(2), core.basis_projector(2, 0)
    return DensityMatrix.product(abc, {"A": mm, "B": mm, "C": p0})


# one summary line per acceptance criterion
_criteria: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    label = dict(report.user_properties).get("criterion")
    if label:
        _criteria.append(("PASS" if report.passed else "FAIL", label))


def _order(item):
    num, suffix = re.match(r"AC(\d+)(\w*)", item[1]).groups()
    return int(num), suffix


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for status, label in sorted(_criteria, key=_order):
        terminalreporter.write_line(f"[{status}] {label}")
