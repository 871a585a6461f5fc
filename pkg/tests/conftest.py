import numpy as np
import pytest

from tailratio.families import FAMILY_NAMES, builtin_family

# Interior test points per family: (x values in the monotone tail, gamma values).
GRIDS = {
    "weibull": ((0.5, 1.0, 1.5, 2.0, 3.0), (1.2, 1.5, 2.0, 2.5, 3.0)),
    "normal_variance": ((0.5, 1.0, 2.0, 3.0, 5.0), (0.5, 0.8, 1.0, 1.5, 2.0)),
    "gumbel_type": ((0.2, 0.5, 1.0, 1.5, 2.0), (0.5, 0.8, 1.0, 1.5, 2.0)),
    "log_weibull": ((2.0, 3.0, 5.0, 8.0, 12.0), (1.2, 1.5, 2.0, 2.5, 3.0)),
    "log_normal": ((1.5, 2.0, 5.0, 10.0, 30.0), (0.5, 0.8, 1.0, 1.5, 2.0)),
}

# Three gamma values per family used by the expansion and normalization suites.
GAMMAS3 = {
    "weibull": (1.5, 2.0, 3.0),
    "normal_variance": (0.5, 1.0, 2.0),
    "gumbel_type": (0.5, 1.0, 2.0),
    "log_weibull": (1.5, 2.0, 3.0),
    "log_normal": (0.5, 1.0, 2.0),
}


@pytest.fixture(params=FAMILY_NAMES)
def family(request):
    return builtin_family(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, collected by tests/test_acceptance.py.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
