import numpy as np
import pytest

from vatrack.attitude_error import ReferenceSet, build_w
from vatrack.scenario import builtin_scenario


@pytest.fixture(scope="session")
def bench():
    """The shipped benchmark scenario (adaptive, noisy)."""
    return builtin_scenario("paper_sec5")


@pytest.fixture(scope="session")
def bench_quiet(bench):
    return bench.replace(**{"sensors.vector_noise": False, "sensors.gyro_noise": False})


@pytest.fixture(scope="session")
def bench_w(bench):
    return build_w(bench.reference_set())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unit(rng, n=None):
    shape = (3,) if n is None else (n, 3)
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_refs(rng, n=3):
    return ReferenceSet(random_unit(rng, n), rng.uniform(0.05, 1.0, n))


# acceptance summary ---------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
