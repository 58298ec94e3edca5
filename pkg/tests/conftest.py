import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trajsearch import kernels  # noqa: E402

try:
    import numba  # noqa: F401

    BACKENDS = ["numpy", "numba"]
except ImportError:  # pragma: no cover
    BACKENDS = ["numpy"]


@pytest.fixture(params=BACKENDS)
def kern(request):
    """Each kernel module in turn."""
    return kernels.load(request.param)


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Swap the active kernels for the duration of a test."""
    mod = kernels.load(request.param)
    monkeypatch.setattr(kernels, "active", mod)
    return request.param


def pytest_terminal_summary(terminalreporter):
    """Print one PASS/FAIL line per acceptance criterion that ran."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
