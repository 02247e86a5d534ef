import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance PASS/FAIL lines collected during the run."""
    import sys

    report = {}
    for name, module in list(sys.modules.items()):
        if name.endswith("test_acceptance"):
            report.update(getattr(module, "REPORT", {}))
    if report:
        terminalreporter.section("acceptance criteria")
        for number in sorted(report):
            terminalreporter.write_line(report[number])
