import numpy as np
import pytest

from beliefnet.core import WorldSignalStructure, make_binary_structure
from beliefnet.topology import Network

WORLD_HIGH = 0.8


@pytest.fixture
def world():
    return WorldSignalStructure.binary(WORLD_HIGH)


@pytest.fixture
def conservative():
    return make_binary_structure(0.6, 0.4)


@pytest.fixture
def radical():
    return make_binary_structure(0.9, 0.1)


@pytest.fixture
def negative():
    return make_binary_structure(0.4, 0.6)


@pytest.fixture
def triangle():
    return Network.from_undirected(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path4():
    return Network.from_undirected(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("BELIEFNET_SEED", "BELIEFNET_WORKERS", "BELIEFNET_LOG_LEVEL", "BELIEFNET_MAX_RETRIES"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)
