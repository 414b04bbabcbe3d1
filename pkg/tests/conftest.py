import numpy as np
import pytest

from blockcascade import _accel, kernels

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


BACKENDS = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every dispatching kernel to one backend for the test."""
    suffix = "_nb" if request.param == "numba" else "_np"
    for name in ("block_descriptors", "cascade_step", "em_fit",
                 "accumulate_votes", "log_threshold"):
        monkeypatch.setattr(kernels, name, getattr(kernels, name + suffix))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
