import contextlib

import numpy as np
import pytest

from mosquito_release.control import TimeGrid
from mosquito_release.model import SitParams, WolParams
from mosquito_release.optimizer import ControlProblem


@pytest.fixture(scope="session")
def sit():
    return SitParams()


@pytest.fixture(scope="session")
def wol():
    return WolParams()


@pytest.fixture(scope="session")
def sit_problem(sit):
    # desk-scale version of the one-week SIT scenario
    return ControlProblem(sit, TimeGrid(7.0, 140), 1000.0, 3000.0)


@pytest.fixture(scope="session")
def wol_problem(wol):
    return ControlProblem(wol, TimeGrid.default(90.0), 500.0, 10000.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# ---------------------------------------------------------------------------
# acceptance reporting: one line per criterion in the terminal summary

_acceptance = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    rows = request.config.stash.setdefault(_acceptance, [])

    @contextlib.contextmanager
    def check(number, title):
        info = {"status": "PASS", "detail": ""}
        try:
            yield info
        except BaseException as exc:
            detail = info["detail"] or f"{type(exc).__name__}: {exc}".splitlines()[0]
            rows.append((number, "FAIL", title, detail[:160]))
            raise
        rows.append((number, info["status"], title, info["detail"]))

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(_acceptance, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, detail in sorted(rows, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}: {detail}")
