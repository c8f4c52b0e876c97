import contextlib
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("suite", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Context manager that times one acceptance criterion and records a PASS/FAIL line.

    The block may set ``state["detail"]`` to a short measurement summary. The
    criterion fails if the block raises or exceeds its runtime limit.
    """

    @contextlib.contextmanager
    def run(number: int, title: str, limit: float):
        state = {"detail": ""}
        t0 = time.perf_counter()
        ok = False
        try:
            yield state
            ok = True
        finally:
            elapsed = time.perf_counter() - t0
            verdict = "PASS" if ok and elapsed <= limit else "FAIL"
            line = f"criterion {number:2d}: {verdict}  {title}  [{elapsed:.1f}s, limit {limit:g}s]"
            if state["detail"]:
                line += f"  {state['detail']}"
            _CRITERIA[number] = line
            print(line)
        assert elapsed <= limit, f"criterion {number} ran {elapsed:.1f}s, limit {limit:g}s"

    return run


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
