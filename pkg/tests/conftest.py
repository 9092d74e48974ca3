import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report(request):
    """Record one ``PASS``/``FAIL`` line for an acceptance criterion and echo it."""
    terminal = request.config.pluginmanager.getplugin("terminalreporter")

    def _report(number, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail}"
        _ACCEPTANCE_LINES.append((number, line))
        if terminal is not None:
            terminal.write_line("")
            terminal.write_line(line)
        else:
            print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES, key=lambda x: x[0]):
            terminalreporter.write_line(line)
