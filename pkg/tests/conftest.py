from __future__ import annotations

import numpy as np
import pytest

from subwave1d import kernels

V1 = 1 + 1.38j
V2 = 1 - 1.42j


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request, monkeypatch):
    """Run the test once per importable kernel implementation."""
    mod = kernels.backends()[request.param]
    monkeypatch.setattr(kernels, "continue_branch", mod.continue_branch)
    monkeypatch.setattr(kernels, "wilson_sum", mod.wilson_sum)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one verdict line per acceptance criterion, printed after the test run
ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def report():
    def record(key: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE[key] = f"criterion {key}: {'PASS' if ok else 'FAIL'} - {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k)):
            terminalreporter.write_line(ACCEPTANCE[key])
