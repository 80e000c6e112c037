import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_pair():
    """A 12-terminal disk pair shared by the coupling and resection tests."""
    from poroperf.domain import Disk
    from poroperf.synthesis import SynthesisConfig, synthesize_pair
    return synthesize_pair(Disk(), config=SynthesisConfig(n_terminals=12, seed=7))


@pytest.fixture(scope="session")
def coarse_disk():
    from poroperf.mesh import gen_disk_mesh
    return gen_disk_mesh(0.01, 0.01 / 12)


@pytest.fixture(scope="session")
def bench_pair():
    """Disk benchmark trees: 50 terminals per tree, default benchmark flows."""
    from poroperf.domain import Disk
    from poroperf.synthesis import SynthesisConfig, synthesize_pair
    return synthesize_pair(Disk(), config=SynthesisConfig(n_terminals=50, seed=1))


@pytest.fixture(scope="session")
def bench_mesh():
    """8 * 68^2 = 36992 triangles on the r = 1 cm disk."""
    from poroperf.mesh import gen_disk_mesh
    return gen_disk_mesh(0.01, 0.01 / 68)


# -- acceptance summary ---------------------------------------------------------------------
_ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """``criterion(k, ok, detail)`` records one acceptance line and returns ``ok``."""
    def record(k, ok, detail):
        _ACCEPTANCE[k] = (bool(ok), detail)
        print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
