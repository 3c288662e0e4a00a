import numpy as np
import pytest

from degdiff import kernels
from degdiff._accel import HAVE_NUMBA


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once with each kernel implementation active."""
    if request.param == "numba" and not HAVE_NUMBA:
        pytest.skip("numba not installed")
    thomas = kernels.thomas_numba if request.param == "numba" else kernels.thomas_numpy
    sor = kernels.sor_2d_numba if request.param == "numba" else kernels.sor_2d_numpy
    monkeypatch.setattr(kernels, "thomas", thomas)
    monkeypatch.setattr(kernels, "sor_2d", sor)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """``report(criterion, ok, detail)`` records one checked item of a criterion."""
    store = request.config.stash.setdefault(ACCEPTANCE, {})

    def report(criterion, ok, detail):
        store.setdefault(criterion, []).append((bool(ok), detail))
        return bool(ok)

    return report


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(store):
        items = store[criterion]
        status = "PASS" if all(ok for ok, _ in items) else "FAIL"
        terminalreporter.write_line(f"criterion {criterion:>2}: {status}")
        for ok, detail in items:
            terminalreporter.write_line(f"    [{'pass' if ok else 'FAIL'}] {detail}")
