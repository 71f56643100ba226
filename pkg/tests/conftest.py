import math

import numpy as np
import pytest

from eqpost.posterior import MixturePrior


def random_instance(rng):
    """A random ``(y, sigma2, prior)`` triple; about a third of the components are
    (near-)point masses with ``tau2 <= 1e-10``."""
    w = rng.dirichlet(np.ones(3))
    means = rng.uniform(-2.5, 2.5, size=3)
    tau2 = 10.0 ** rng.uniform(-4, 0.7, size=3)
    for j in range(3):
        if rng.random() < 1 / 3:
            tau2[j] = rng.choice([0.0, 1e-12, 10.0 ** rng.uniform(-14, -10)])
    y = rng.uniform(-4, 4)
    sigma2 = 10.0 ** rng.uniform(-4, 1)
    return float(y), float(sigma2), MixturePrior(tuple(w / w.sum()), tuple(means), tuple(tau2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one PASS/FAIL line per acceptance criterion, printed after the run
_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    entry = _criteria.setdefault(number, {"passed": True, "detail": ""})
    if report.failed:
        entry["passed"] = False
    for key, value in report.user_properties:
        if key == "detail":
            entry["detail"] = value


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["passed"] else "FAIL"
        terminalreporter.write_line(f"{status} criterion {number}: {entry['detail']}")
