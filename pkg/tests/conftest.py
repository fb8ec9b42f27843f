import numpy as np
import pytest

from ddmr.config import RunConfig
from ddmr import pipeline


@pytest.fixture(scope="session")
def small_colored_config():
    return RunConfig(problem="diffusion", noise="colored", corr_length=0.25,
                     n_global_modes=40, kl_grid=32, mesh_n=16, sx=4, sy=4,
                     n_local_modes=4, m_interface=4, m_interior=8,
                     poly_order=3, k_solution=60, k_matrix=300, seed=0)


@pytest.fixture(scope="session")
def small_colored_model(small_colored_config):
    return pipeline.offline_train(small_colored_config)


@pytest.fixture(scope="session")
def small_white_config():
    return RunConfig(problem="diffusion", noise="white", sigma=0.1,
                     mesh_n=8, sx=2, sy=2, m_interface=3, m_interior=9,
                     poly_order=5, k_solution=40, k_matrix=60, seed=0)


@pytest.fixture(scope="session")
def small_white_model(small_white_config):
    return pipeline.offline_train(small_white_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
