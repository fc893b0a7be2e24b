import numpy as np
import pytest

from windrom.bench import generate_snapshots, snapshot_sets
from windrom.ins import InsProblem, ParameterPoint
from windrom.mesh import BoundaryTag, synth_urban_mesh, unit_square_mesh


@pytest.fixture(scope="session")
def small_urban_mesh():
    return synth_urban_mesh(2, 2, 0.18, refine_level=1)


@pytest.fixture(scope="session")
def small_fom(small_urban_mesh):
    return InsProblem(small_urban_mesh, nu=0.25)


@pytest.fixture(scope="session")
def small_snapshots(small_fom):
    """Twelve FOM solves over w_i in [0.5, 10]; shared by the ROM tests."""
    params = [ParameterPoint(w) for w in np.linspace(0.5, 10.0, 12)]
    U, P = generate_snapshots(small_fom, params)
    ss_u, ss_p = snapshot_sets(small_fom, params, U, P)
    return params, ss_u, ss_p


@pytest.fixture(scope="session")
def channel_mesh():
    """Poiseuille channel: west inflow, east outflow, walls no-slip."""
    return unit_square_mesh(
        8, width=2.0, height=1.0,
        tags={"west": BoundaryTag.INFLOW, "east": BoundaryTag.OUTFLOW,
              "south": BoundaryTag.NOSLIP, "north": BoundaryTag.NOSLIP})


def parabolic_profile(u_max, height=1.0):
    def profile(coords, mu):
        y = coords[:, 1]
        g = np.zeros((len(coords), 2))
        g[:, 0] = 4.0 * u_max * y * (height - y) / height ** 2 * mu.w_i
        return g
    return profile


def cavity_mesh(n):
    return unit_square_mesh(
        n, tags={"north": BoundaryTag.INFLOW, "south": BoundaryTag.NOSLIP,
                 "west": BoundaryTag.NOSLIP, "east": BoundaryTag.NOSLIP},
        char_length=1.0)


def regularized_lid(coords, mu):
    x = coords[:, 0]
    g = np.zeros((len(coords), 2))
    g[:, 0] = mu.w_i * 16.0 * x ** 2 * (1.0 - x) ** 2
    return g
