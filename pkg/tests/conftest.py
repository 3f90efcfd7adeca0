import numpy as np
import pytest

from cauchylag.fields import LabelGrid
from cauchylag.presets import make_preset_fields
from cauchylag.stepper import compute_coefficients

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def abc_grid():
    return LabelGrid("periodic3d", (32, 32, 32), (TWO_PI,) * 3)


@pytest.fixture(scope="session")
def abc_fields(abc_grid):
    return make_preset_fields("abc", abc_grid)


@pytest.fixture(scope="session")
def abc_series8(abc_fields):
    v0, w0 = abc_fields
    records = []
    series = compute_coefficients(v0, w0, 8, records=records)
    return series, records


@pytest.fixture(scope="session")
def channel_grid():
    return LabelGrid("channel", (32, 32, 33), (TWO_PI, TWO_PI, np.pi))


@pytest.fixture(scope="session")
def vortex_series(channel_grid):
    v0, w0 = make_preset_fields("channel-vortex", channel_grid, {"scale": 3.0})
    records = []
    series = compute_coefficients(v0, w0, 8, records=records)
    return v0, w0, series, records


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def report_line(request):
    """Record one PASS/FAIL line; all lines are echoed in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def emit(ok: bool, number: int, text: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}"
        lines.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
