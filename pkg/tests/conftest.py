import numpy as np
import pytest

from koopnem import PolicyKernelSpec, RadialKernelSpec, assemble, fit_kernel_edmd
from koopnem.simulators import generate_tank_grid


@pytest.fixture(scope="session")
def tank_kernels():
    return RadialKernelSpec.wendland(1, 1, 1.0), PolicyKernelSpec(0.25)


@pytest.fixture(scope="session")
def tank_dataset():
    return generate_tank_grid(21, 21)


@pytest.fixture(scope="session")
def tank_grams(tank_dataset, tank_kernels):
    return assemble(tank_dataset, *tank_kernels)


@pytest.fixture(scope="session")
def tank_edmd(tank_dataset, tank_grams, tank_kernels):
    return fit_kernel_edmd(tank_grams, 0.0, tank_dataset, *tank_kernels)


@pytest.fixture(scope="session")
def small_tank(tank_kernels):
    """A 9 x 7 grid: cheap enough for property tests and brute-force oracles."""
    ds = generate_tank_grid(9, 7)
    return ds, assemble(ds, *tank_kernels)


@pytest.fixture(scope="session")
def tank_test_grid():
    X, A = np.meshgrid(np.linspace(-2, 2, 41), np.linspace(-1, 1, 41), indexing="ij")
    return X.ravel()[:, None], A.ravel()[:, None]


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: l.split("] ", 1)[1]):
            terminalreporter.write_line(line)
