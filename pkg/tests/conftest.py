"""Shared fixtures: reference potentials and one expensive dense line."""

import numpy as np
import pytest

from scatterkit import PiecewiseConstantPotential, count_bound_states, trace_fixed_l_line


@pytest.fixture(scope="session")
def pcpot():
    """The two-step reference potential: -2 on (0,2), -1 on (2,3), 0 beyond."""
    return PiecewiseConstantPotential((2.0, 3.0), (-2.0, -1.0))


@pytest.fixture(scope="session")
def pcpot_dense_line(pcpot):
    """First s-wave nodal line of pcpot, traced densely for reconstruction.

    Spans r from ~0.4 to ~5.8, which requires energies from 60 down to
    just above the (single) bound state.
    """
    e_bottom = count_bound_states(pcpot, 0).energies[0] + 1e-3
    grid = np.unique(np.concatenate([
        np.geomspace(60.0, 0.05, 25),
        -np.geomspace(1e-3, -e_bottom - 1e-9, 20),
    ]))[::-1]
    return trace_fixed_l_line(pcpot, 0, 1, grid, r_cap=7.0, refine_rel=0.004)
