import numpy as np
import pytest

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record_acceptance(request):
    """Store a one-line verdict for the acceptance summary."""

    def record(label, passed, detail):
        ACCEPTANCE_RESULTS[request.node.name] = (label, bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label, passed, detail in sorted(ACCEPTANCE_RESULTS.values()):
        tr.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
