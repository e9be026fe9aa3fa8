import math

import numpy as np
import pytest

from tailrisk_dc.dp_core import Scenario, StepOperators
from tailrisk_dc.kou import PAPER_PARAMS, DensityConfig
from tailrisk_dc.lattice import GridSpec, build

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def small_grid(n_y_dag=128, n=24, n_policy_wealth=300, **kw) -> GridSpec:
    base = dict(inner=6.0, outer=12.0, b_max=1.0e8, w_threshold_max=1.0e8, n_y=n_y_dag // 2,
                n_y_dag=n_y_dag, n_b=n, n_w=n, n_u=n, n_policy_wealth=n_policy_wealth,
                spacing="sinh", spacing_scale=2.0e4)
    base.update(kw)
    return GridSpec.centered(math.log(1.0e5), **base)


@pytest.fixture(scope="session")
def small_scenario():
    return Scenario(T=5.0, M=5, q=20000.0, W0=0.0)


@pytest.fixture(scope="session")
def small_lattice():
    return build(small_grid())


@pytest.fixture(scope="session")
def small_ops(small_lattice, small_scenario):
    return StepOperators(small_lattice, PAPER_PARAMS, small_scenario, DensityConfig(12, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
