import numpy as np
import pytest

from twoscale.diffusion_cell import CellInfrastructure
from twoscale.elastic_cell import (effective_elasticity, isotropic_tensor,
                                   solve_elastic_cells)
from twoscale.mesh import build_cell_grid


@pytest.fixture(scope="session")
def cross3():
    """Cross cell at refinement 3 with unit Lame correctors, shared
    read-only by many tests to keep the suite fast."""
    grid = build_cell_grid(3)
    material = isotropic_tensor(1.0, 1.0)
    chi = solve_elastic_cells(grid, material)
    a_star = effective_elasticity(chi, material, grid)
    return grid, material, chi, a_star


@pytest.fixture()
def cross3_infra(cross3):
    grid, _, chi, _ = cross3
    infra = CellInfrastructure(grid, chi, 0.5 * np.eye(2))
    yield infra
    infra.close()
