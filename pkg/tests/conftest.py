import numpy as np
import pytest

from tofwave import spectral as sp
from tofwave.gridw import Grid
from tofwave.model import DEFAULT_PARAMS, solve_rest_state
from tofwave.profile import solve_profile


class Wave:
    """Profile, operators and adjoint null vector for one grid."""

    def __init__(self, grid):
        self.params = DEFAULT_PARAMS
        self.rest = solve_rest_state(self.params)
        self.profile = solve_profile(self.params, self.rest, grid)
        self.grid = grid
        self.L = sp.assemble_L(self.profile)
        self.L_adj = sp.assemble_L_adjoint(self.profile)
        self._adj = None

    @property
    def adj(self):
        if self._adj is None:
            self._adj = sp.adjoint_null_vector(self.L_adj, self.profile)
        return self._adj

    @property
    def psi2(self):
        return self.adj.psi2


@pytest.fixture(scope="session")
def wave():
    """Desk-scale wave: L = 200, N = 4096."""
    return Wave(Grid(200.0, 4096))


@pytest.fixture(scope="session")
def small_wave():
    """Coarser wave for cheap structural tests: L = 80, N = 1024."""
    return Wave(Grid(80.0, 1024))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
