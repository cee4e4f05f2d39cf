import numpy as np
import pytest

from netisac.model import ArrayConfig, SensingParams, SystemLayout, build_target_grid, sample_comm_channels

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if passed else 'FAIL'} - {detail}")


BS = [[-60.0, 0.0], [60.0, 0.0], [0.0, 60.0]]
CU = [[-10.0, 0.0], [10.0, 0.0], [0.0, 10.0]]


def make_scene(n_a=4, seed=0, grid_dim=3):
    array = ArrayConfig(n_a, n_a)
    layout = SystemLayout(BS, CU, array)
    params = SensingParams()
    grid = build_target_grid(layout, params, grid_dim=grid_dim)
    channels = sample_comm_channels(layout, seed=seed)
    return layout, params, grid, channels


@pytest.fixture
def scene():
    return make_scene()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
