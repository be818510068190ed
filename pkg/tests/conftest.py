import math

import numpy as np
import pytest

from fracident.cheb import build_schedule
from fracident.mesh_fem import build_mesh
from fracident.opfamily import precompute


@pytest.fixture(scope="session")
def mesh8():
    return build_mesh(-1.0, 1.0, 8)


@pytest.fixture(scope="session")
def family64():
    """Unscaled family on a coarse mesh, used for derivative checks."""
    mesh = build_mesh(-1.0, 1.0, 64)
    sch = build_schedule((0.05, 0.95), math.inf, 1e-8, 0.3)
    return precompute(mesh, sch, factor=0.5)


@pytest.fixture(scope="session")
def family64_scaled():
    mesh = build_mesh(-1.0, 1.0, 64)
    sch = build_schedule((0.05, 0.95), math.inf, 1e-8, 0.3)
    return precompute(mesh, sch, scaled=True, factor=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion():
    """Record ``(ok, detail)`` for an acceptance criterion and print it."""
    def record(number, ok, detail=""):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[k])
