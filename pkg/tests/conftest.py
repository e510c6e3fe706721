from dataclasses import replace

import numpy as np
import pytest

from cfdist.cli.options import get_config_params, load_config_if_exists
from cfdist.config.config import RunConfig, VaeConfig, default_run_config
from cfdist.data.dataset import Dataset
from cfdist.sim.dgp import (
    BoundsDgpSpec,
    BoundsVariant,
    IvDgpSpec,
    IvOutcome,
    IvTreatment,
    SimulatedData,
    generate,
)


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run acceptance-scale simulations marked slow",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def clear_config_cache():
    get_config_params.cache_clear()
    load_config_if_exists.cache_clear()
    yield
    get_config_params.cache_clear()
    load_config_if_exists.cache_clear()


@pytest.fixture(scope="session")
def short_vae() -> VaeConfig:
    return VaeConfig(latent_dim=1, hidden=8, epochs=3, batch_size=128, min_train_rows=50)


@pytest.fixture(scope="session")
def run_config(short_vae: VaeConfig) -> RunConfig:
    return replace(default_run_config(), n_mc=20_000, vae=short_vae)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bounds_sim() -> SimulatedData:
    return generate(BoundsDgpSpec(variant=BoundsVariant.LINEAR, n=2000, seed=7))


@pytest.fixture(scope="session")
def bounds_data(bounds_sim: SimulatedData) -> Dataset:
    return bounds_sim.dataset


@pytest.fixture(scope="session")
def iv_binary_sim() -> SimulatedData:
    return generate(IvDgpSpec(outcome=IvOutcome.LINEAR, treatment=IvTreatment.BINARY, n=1200, seed=11))


@pytest.fixture(scope="session")
def iv_continuous_sim() -> SimulatedData:
    return generate(IvDgpSpec(outcome=IvOutcome.LINEAR, treatment=IvTreatment.CONTINUOUS, n=1200, seed=13))
