"""Shared helpers for the test suite."""

import math

import numpy as np
import pytest

from edgelab.core import PointConfiguration
from edgelab.estimators import EstimatorSettings

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# one line per acceptance criterion, echoed after the run so the verdicts
# survive pytest's output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


RIGIDITY_SETTINGS = EstimatorSettings(c1=4.0, c2=0.5, M=1)


def synthetic_rigidity_config(j: int,
                              settings: EstimatorSettings = RIGIDITY_SETTINGS):
    """A configuration outside [0, 1) whose rigidity count is exactly j.

    Built on the single-horizon ladder t = exp(-c1): a lattice matching
    the leading-order level density is accumulated until the remaining
    trace deficit v sits in (0.01, 0.99), and one closing point placed at
    -(2/t) log(v) makes

        leading(t) + constant - trace(config) = j

    hold to float roundoff with known = (0, 2), whose constant term is 0.
    The j missing points sit at the origin (each contributes exactly 1).
    """
    ts = settings.times()
    if ts.size != 1:
        raise ValueError("construction assumes a single-horizon ladder (M=1)")
    t = float(ts[0])
    target = SQRT_2_OVER_PI * t ** -1.5 - j
    pts, running, k = [], 0.0, 1
    while True:
        x = (1.5 * math.pi * (k - 0.5)) ** (2.0 / 3.0)
        term = math.exp(-0.5 * t * x)
        if running + term > target - 0.01:
            break
        pts.append(x)
        running += term
        k += 1
    v = target - running
    assert 0.01 <= v < 0.99, f"closing weight {v} escaped its bracket"
    pts.append(-(2.0 / t) * math.log(v))
    return PointConfiguration(points=np.sort(np.asarray(pts)),
                              source=f"synthetic-rigidity-{j}")


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
