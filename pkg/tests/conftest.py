import numpy as np
import pytest

from gpselect.items import synth_gp_itemset
from gpselect.kernels import GramMatrix, KernelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_psd(rng, n, rank=None):
    A = rng.normal(size=(n, rank or n))
    return A @ A.T / (rank or n)


@pytest.fixture
def small_instance():
    kernel = KernelSpec("rbf", 0.25)
    items, oracle = synth_gp_itemset(40, 2, kernel, 0.1, cost_range=(1.0, 3.0), seed=3)
    return items, oracle, kernel, GramMatrix(kernel, items.features)


_ACCEPTANCE: list = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(name, ok, detail=""):
        _ACCEPTANCE.append((name, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
