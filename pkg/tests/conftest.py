import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# kernels compile on first use, so the first example of a property can be slow
settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record a one-line verdict for the terminal summary."""

    def record(number: int, ok: bool, detail: str):
        _ACCEPTANCE.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(_ACCEPTANCE[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
