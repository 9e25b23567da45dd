import os

from hypothesis import HealthCheck, settings

settings.register_profile("ci", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

import pytest

CRITERIA = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def criteria(request):
    """Verdicts of the acceptance criteria, printed in the terminal summary."""
    return request.config.stash.setdefault(CRITERIA, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = config.stash.get(CRITERIA, {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(verdicts):
        ok, detail = verdicts[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
