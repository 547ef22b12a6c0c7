import os

import numpy as np
import pytest


def pytest_collection_modifyitems(config, items):
    if os.environ.get("UNITARY_SYNTH_MANUAL") == "1":
        return
    skip = pytest.mark.skip(reason="manual run: set UNITARY_SYNTH_MANUAL=1")
    for item in items:
        if "manual" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    """Record one PASS/FAIL line; repeated in the terminal summary."""
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
