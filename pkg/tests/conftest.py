import math

import numpy as np
import pytest

from config import settings
from models.velocity import Moments
from utils.velocity_grid import build_grid, maxwellian


@pytest.fixture(autouse=True)
def isolated_dirs(tmp_path, monkeypatch):
    """Kernel cache and run outputs go to a per-test directory."""
    monkeypatch.setattr(settings, "kernel_cache_dir", str(tmp_path / "kernel_cache"))
    monkeypatch.setattr(settings, "output_dir", str(tmp_path / "runs"))
    return tmp_path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid8():
    return build_grid(2, 8, 6.0)


@pytest.fixture
def grid16():
    return build_grid(2, 16, 8.0)


@pytest.fixture
def grid32():
    return build_grid(2, 32, 8.0)


def unit_maxwellian(grid, density=1.0, velocity=(0.0, 0.0), temperature=1.0):
    return maxwellian(Moments.from_primitive(density, list(velocity), temperature, grid.dim), grid)


def gaussian_entropy(density, temperature, dim=2):
    return density * (math.log(density / (2.0 * math.pi * temperature) ** (dim / 2.0)) - dim / 2.0)
