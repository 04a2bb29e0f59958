import numpy as np
import pytest

from cqnls import SpectralField, TorusGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20260817)


@pytest.fixture
def make_field(rng):
    """Factory for random complex fields on a given grid."""
    def _make(grid, scale=1.0, decay=0.0):
        shape = grid.lattice_shape
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        if decay:
            c = c / (1.0 + grid.symbol_sq) ** (decay / 2.0)
        return SpectralField(grid, scale * c)
    return _make


@pytest.fixture
def small_grid():
    return TorusGrid(2)


@pytest.fixture
def medium_grid():
    return TorusGrid(3)
