import math

import pytest

from pitchflap.quasipoly import extract_pq
from pitchflap.rotor_model import ControlGains, RotorParams, build_delay_system

TWO_PI = 2.0 * math.pi

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def ref_params():
    return RotorParams(sigma=0.08, nu1_sq=10.8)


@pytest.fixture
def ref_gains():
    return ControlGains(6.75e-4, 0.6e-4)


@pytest.fixture
def ref_system(ref_params, ref_gains):
    return build_delay_system(ref_params, ref_gains, 0.0)


@pytest.fixture
def ref_qp(ref_system):
    return extract_pq(ref_system)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
