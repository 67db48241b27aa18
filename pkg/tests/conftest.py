import numpy as np
import pytest

from spnorm.mesh import Field, RadialGrid, make_radial_grid


def gaussian_field(grid: RadialGrid, a: float = 1.0, sigma: float = 1.0) -> Field:
    """Mass-a^2 Gaussian: u(r) = a (pi sigma^2)^(-3/4) exp(-r^2 / 2 sigma^2)."""
    r = grid.nodes
    return Field(grid, a * (np.pi * sigma**2) ** -0.75 * np.exp(-(r**2) / (2 * sigma**2)))


def gaussian_lp(a: float, sigma: float, m: float) -> float:
    """Closed form |u|_m^m for the mass-a^2 Gaussian."""
    return a**m * (np.pi * sigma**2) ** (-0.75 * m) * (2 * np.pi * sigma**2 / m) ** 1.5


def smooth_random_field(grid: RadialGrid, rng, decay: float = 1.0) -> Field:
    """Positive decaying field with a few random radial oscillations."""
    r = grid.nodes
    amp = 1.0 + 0.3 * np.sin(rng.uniform(1, 4) * np.pi * r / grid.r_max)
    bump = rng.uniform(0.5, 1.5)
    return Field(grid, amp * np.exp(-(r**2) * bump / (2 * decay**2)))


@pytest.fixture
def grid_fine() -> RadialGrid:
    return make_radial_grid(40.0, 4096)


@pytest.fixture
def grid_mid() -> RadialGrid:
    return make_radial_grid(20.0, 1024)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
