import numpy as np
import pytest

from sbtlab.geometry import build_centerline, build_geometry, radius_preset

# criterion id -> (passed, detail); filled by the acceptance suite
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def straight01():
    return build_geometry(build_centerline("straight", {}), radius_preset("prolate", 0.1))


@pytest.fixture(scope="session")
def arc01():
    return build_geometry(build_centerline("circular-arc", {"radius": 2.0}),
                          radius_preset("prolate", 0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
