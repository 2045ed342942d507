import math

import numpy as np
import pytest

from critnls.fields import ModelParams, RadialGrid, RealField
from critnls.groundstate import find_ground_state

# Closed-form ground state of the one-dimensional quintic equation at omega = 1.
SOLITON_ALPHA = 3**0.25
SOLITON_MASS = math.sqrt(3) * math.pi / 2          # 2.7206990...
SOLITON_GRAD = SOLITON_MASS / 2                    # ||psi'||^2 = ||psi||^2 / sigma
SOLITON_I = 3 * SOLITON_GRAD                       # I = (sigma + 1) ||psi'||^2
SOLITON_J = math.pi**2 / 4


def soliton(grid: RadialGrid) -> RealField:
    return RealField(grid, SOLITON_ALPHA / np.sqrt(np.cosh(2 * grid.nodes)))


@pytest.fixture(scope="session")
def quintic():
    p = ModelParams(1, 0.0)
    return find_ground_state(p, grid=RadialGrid(15.0, 4096, 1))


@pytest.fixture(scope="session")
def ground_states():
    """Default-grid ground states for the inhomogeneous cases."""
    return {(N, b): find_ground_state(ModelParams(N, b)) for N, b in ((1, 0.5), (2, 1.0), (3, 1.0))}
