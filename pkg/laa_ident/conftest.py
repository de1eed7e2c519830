"""
Shared test fixtures
"""

import numpy as np
import pytest

from laa_ident.dynamics import AttackConfig, integrate
from laa_ident.grid_model import GridModel, load_case, save_case
from laa_ident.pmu import sample
from laa_ident.scenarios import get_scenario


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="Run full-scale simulations, training and Monte Carlo batches")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_toy_model(**changes) -> GridModel:
    """3-bus meshed grid: generator 1, loads 2 and 3"""
    values = dict(
        name="toy3",
        gen_buses=(1,),
        load_buses=(2, 3),
        inertia=np.array([2.0]),
        damping=np.array([1.0, 0.5, 0.5]),
        gov_p_gain=np.array([1.0]),
        gov_i_gain=np.array([0.6]),
        susceptance=np.array([[0.0, 5.0, 4.0],
                              [5.0, 0.0, 3.0],
                              [4.0, 3.0, 0.0]]),
        secure_load=np.array([0.2, 0.1]),
        vulnerable_load=np.array([0.3, 0.3]),
        parameter_sets={"A": {"description": "toy"}},
        parameter_set="A",
    )
    values.update(changes)
    return GridModel(**values)


@pytest.fixture
def toy_model():
    return make_toy_model()


@pytest.fixture
def toy_attack(toy_model):
    return AttackConfig.from_entries(toy_model, {(2, 1): 0.5}, {2: 0.05})


@pytest.fixture
def toy_trajectory(toy_model, toy_attack):
    return integrate(toy_model, toy_attack, (0.0, 5.0))


@pytest.fixture
def toy_clean(toy_trajectory):
    """Noiseless 50 fps measurements of the attacked toy grid"""
    return sample(toy_trajectory, 50.0, (0.0, 5.0))


@pytest.fixture
def toy_case_path(tmp_path, toy_model):
    path = tmp_path / "toy3.json"
    save_case(toy_model, path)
    return path


@pytest.fixture(scope="session")
def ieee39_fast():
    return load_case("ieee39", parameter_set="A")


@pytest.fixture(scope="session")
def ieee39_slow():
    return load_case("ieee39", parameter_set="B")


@pytest.fixture(scope="session")
def fast_trajectory(ieee39_fast):
    scenario = get_scenario("ieee39-fast-single")
    return integrate(ieee39_fast, scenario.attack(ieee39_fast), scenario.sim_span)


@pytest.fixture(scope="session")
def fast_clean(fast_trajectory):
    scenario = get_scenario("ieee39-fast-single")
    return sample(fast_trajectory, scenario.rate_hz, scenario.window)
