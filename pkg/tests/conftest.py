import numpy as np
import pytest

from axiboussinesq.grid_fields import Measure, gaussian, make_grid
from axiboussinesq.mild_solver import SolverConfig, State, evolve

ACCEPTANCE_LINES: dict[int, str] = {}


def record(n: int, passed: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def decay_run():
    """Axis-centred density, zero vorticity, evolved to t = 5 on 64 x 128."""
    grid = make_grid(12.0, 12.0, 64, 128)
    rho0 = gaussian(grid, 5.0, 4.0, 0.0, 0.0, Measure.AXISYM).values
    data = State.from_arrays(0.0, grid, np.zeros(grid.shape), rho0)
    cfg = SolverConfig(grid, T=0.5)
    return evolve(data, 5.0, cfg), cfg


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(8.0, 8.0, 32, 64)
