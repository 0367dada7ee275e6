import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gomoku_zero.game import GameConfig
from gomoku_zero.network import NetworkConfig, PolicyValueNet


@pytest.fixture(scope="session")
def small_config() -> GameConfig:
    return GameConfig(6, 6, 4)


@pytest.fixture(scope="session")
def tiny_net_config() -> NetworkConfig:
    return NetworkConfig(6, 6, trunk_channels=8, trunk_blocks=1, seed=7)


@pytest.fixture(scope="session")
def tiny_net(tiny_net_config) -> PolicyValueNet:
    return PolicyValueNet(tiny_net_config)


class UniformStubNet:
    """Uniform priors, zero values: the untrained-network stand-in."""

    def __init__(self, n_cells: int, scale: float = 1.0, value: float = 0.0):
        self.n_cells = n_cells
        self.scale = scale
        self.value = value

    def forward(self, states):
        b = states.shape[0]
        probs = np.full((b, self.n_cells), self.scale / self.n_cells, dtype=np.float32)
        values = np.full(b, self.value, dtype=np.float32)
        return probs, values


@pytest.fixture
def uniform_net(small_config) -> UniformStubNet:
    return UniformStubNet(small_config.n_cells)
