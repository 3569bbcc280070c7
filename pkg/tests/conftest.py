import numpy as np
import pytest

from autocon.data import Series


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def hourly_series():
    t = np.arange(600)
    vals = np.stack([np.sin(2 * np.pi * t / 24), np.cos(2 * np.pi * t / 50) + 0.01 * t], axis=1)
    ts = np.datetime64("2020-01-01T00:00:00") + t * np.timedelta64(1, "h")
    return Series(vals, ts, "h", "toy", ("a", "b"))


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
