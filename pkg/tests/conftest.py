import numpy as np
import pytest

from tactile_servo import skin_sim


@pytest.fixture(scope="session")
def surface():
    return skin_sim.SkinSurface()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_demos(surface):
    return skin_sim.generate_demos(surface, None, n_regions=2, rot_reps=1, trans_reps=2, seed=5,
                                   sensor=skin_sim.SensorConfig(noise_std=4e-4))


@pytest.fixture(scope="session")
def small_dataset(small_demos):
    from tactile_servo import datapipe

    return datapipe.build_dataset(small_demos, datapipe.DataConfig(n_ae=1200, n_tuples=2000, seed=1))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
