import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from privisac.config import profile

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def desk():
    return profile("desk")


@pytest.fixture
def small():
    """Four antennas and short frames keep solver-heavy tests quick."""
    return profile("desk", m_antennas=4, n_samples=8)


_ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def record():
    """Record the outcome of one acceptance criterion (or lettered part of one)."""
    def _record(criterion: str, passed: bool, detail: str):
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    groups: dict = {}
    for key in sorted(_ACCEPTANCE):
        groups.setdefault(key[0], []).append(key)
    for number, keys in groups.items():
        passed = all(_ACCEPTANCE[k][0] for k in keys)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}")
        for k in keys:
            ok, detail = _ACCEPTANCE[k]
            label = f"  {k}" if len(keys) > 1 or len(k) > 1 else " "
            terminalreporter.write_line(f"{label} [{'pass' if ok else 'fail'}] {detail}")
