import numpy as np
import pytest

from zeroent.branches import DrilParams, farey_a, make_b, make_dril_a
from zeroent.source import TentSource

_CRITERIA: dict[int, tuple[bool, str]] = {}


def record(num: int, ok: bool, detail: str) -> None:
    _CRITERIA[num] = (bool(ok), detail)


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        ok, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def dril_source(gamma, delta, **kw):
    a = make_dril_a(DrilParams(gamma, delta, **kw))
    return TentSource(a, make_b("linear", c=float(a(np.array([1.0]))[0])))


@pytest.fixture(scope="session")
def farey():
    return TentSource(farey_a(), make_b("farey"))


@pytest.fixture(scope="session")
def dril20():
    return dril_source(2.0, 0.0)
