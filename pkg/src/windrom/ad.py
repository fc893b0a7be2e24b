"""Transient advection-diffusion transport of a concentration field.

A P1 concentration is advected by a precomputed Taylor-Hood wind field
with SUPG stabilization and implicit backward Euler stepping. The wind
and the step size are constant in time, so the step matrix is factorized
once and reused. Boundary conditions follow the sign of the wind flux:
zero Dirichlet where the wind enters, natural no-flux elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import SolverError
from .fem import FemWorkspace
from .mesh import build_taylor_hood

# Sign band below which an edge-mean flux counts as tangential.
FLUX_ZERO_BAND = 1e-10


@dataclass(frozen=True)
class BoundaryPartition:
    """Boundary edge indices split by the sign of the edge-mean wind flux."""

    outflow: np.ndarray   # u.n > 0
    tangent: np.ndarray   # u.n = 0 within the zero band
    inflow: np.ndarray    # u.n < 0


@dataclass
class AdProblem:
    """Advection-diffusion setup over a precomputed wind field.

    initial values must lie in [0, 1]; `wind` is a velocity coefficient
    vector on the Taylor-Hood space of `mesh`.
    """

    mesh: object
    wind: np.ndarray
    kappa: float
    initial: np.ndarray
    t_end: float
    dt: float
    source_meta: dict = field(default_factory=dict)
    stabilized: bool = True

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("diffusion coefficient must be positive")
        if self.dt <= 0 or self.t_end < self.dt:
            raise ValueError("need dt > 0 and t_end >= dt")
        self.initial = np.asarray(self.initial, dtype=float)
        if self.initial.min() < -1e-12 or self.initial.max() > 1 + 1e-12:
            raise ValueError("initial nodal values must lie in [0, 1]")


@dataclass
class ConcentrationSeries:
    """Nodal concentration fields on the P1 space at increasing times."""

    times: np.ndarray           # (nt,), starts at 0
    fields: np.ndarray          # (nt, n_p1)
    source_meta: dict

    def at_time(self, t, atol=1e-9):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > atol:
            raise KeyError(f"time {t} not in the stored series")
        return self.fields[k]


def gaussian_source(mesh, center, radius, amplitude=1.0):
    """Truncated Gaussian bump, clipped to [0, 1]: the release field."""
    d2 = ((mesh.vertices - np.asarray(center)) ** 2).sum(axis=1)
    vals = amplitude * np.exp(-4.0 * d2 / radius ** 2)
    vals[d2 > radius ** 2] = 0.0
    return np.clip(vals, 0.0, 1.0)


def partition_ad_boundary(mesh, wind, space=None):
    """Classify boundary edges by the sign of the edge-mean wind flux.

    The mean of u.n over each edge is exact for the quadratic trace
    (Simpson weights on the two endpoints and the midpoint). Returns a
    BoundaryPartition of indices into mesh.boundary_edges.
    """
    space = space or build_taylor_hood(mesh)
    un = space.velocity_nodal(wind)
    edges = mesh.boundary_edges
    v = mesh.vertices

    # midpoint P2 node of each boundary edge
    edge_lookup = {(int(a), int(b)): mesh.n_vertices + k
                   for k, (a, b) in enumerate(space.edges.tolist())}
    mid = np.array([edge_lookup[(min(a, b), max(a, b))] for a, b in edges.tolist()])

    tangents = v[edges[:, 1]] - v[edges[:, 0]]
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    normals /= np.hypot(normals[:, 0], normals[:, 1])[:, None]
    # orient outward: away from the owning triangle's opposite vertex
    opposite = _opposite_vertex(mesh, edges)
    to_inside = v[opposite] - 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])
    flip = (normals * to_inside).sum(axis=1) > 0
    normals[flip] *= -1

    mean_u = (un[edges[:, 0]] + 4.0 * un[mid] + un[edges[:, 1]]) / 6.0
    flux = (mean_u * normals).sum(axis=1)
    speeds = np.hypot(un[:, 0], un[:, 1])
    band = FLUX_ZERO_BAND * max(float(speeds.max()), 1e-300)
    idx = np.arange(len(edges))
    return BoundaryPartition(
        outflow=idx[flux > band],
        tangent=idx[np.abs(flux) <= band],
        inflow=idx[flux < -band],
    )


def _opposite_vertex(mesh, edges):
    """For each boundary edge, the third vertex of its unique triangle."""
    tri_edges = {}
    for t in mesh.triangles:
        for k in range(3):
            a, b = int(t[(k + 1) % 3]), int(t[(k + 2) % 3])
            tri_edges[(min(a, b), max(a, b))] = int(t[k])
    return np.array([tri_edges[(min(a, b), max(a, b))] for a, b in edges.tolist()])


def supg_tau(workspace, wind, kappa, dt):
    """Per-cell streamline-diffusion parameter (see FemWorkspace.supg_tau)."""
    return workspace.supg_tau(wind, kappa, dt)


def solve_ad(problem, space=None, workspace=None):
    """Backward Euler integration over [0, t_end]; one solve per step.

    The step operator is factorized once (wind and dt are constant).
    Dirichlet rows for wind-inflow boundary vertices are eliminated.
    """
    mesh = problem.mesh
    space = space or build_taylor_hood(mesh)
    ws = workspace or FemWorkspace(space)
    part = partition_ad_boundary(mesh, problem.wind, space=space)

    dirichlet = np.unique(mesh.boundary_edges[part.inflow].ravel())
    free = np.setdiff1d(np.arange(mesh.n_vertices), dirichlet)

    M, K = ws.ad_operators(problem.wind, problem.kappa, problem.dt,
                           stabilized=problem.stabilized)
    A = (M / problem.dt + K).tocsc()
    Mdt = (M / problem.dt).tocsr()

    n_steps = int(round(problem.t_end / problem.dt))
    times = problem.dt * np.arange(n_steps + 1)
    fields = np.empty((n_steps + 1, mesh.n_vertices))
    c = problem.initial.copy()
    fields[0] = c

    try:
        lu = spla.splu(A[free][:, free].tocsc())
    except RuntimeError as exc:
        raise SolverError(f"time-step operator factorization failed: {exc}") from exc
    for k in range(1, n_steps + 1):
        rhs = (Mdt @ c)[free]
        cn = np.zeros(mesh.n_vertices)
        cn[free] = lu.solve(rhs)
        if not np.all(np.isfinite(cn)):
            raise SolverError(f"AD solve produced non-finite values at step {k}")
        c = cn
        fields[k] = c
    return ConcentrationSeries(times=times, fields=fields, source_meta=dict(problem.source_meta))


def save_series(series, path, mesh_hash=""):
    """Write a ConcentrationSeries to the binary container format."""
    from .containers import write_container

    meta = {"source": series.source_meta, "mesh_hash": mesh_hash}
    write_container(path, "conc-series", meta,
                    {"times": series.times, "fields": series.fields})


def load_series(path):
    from .containers import read_container

    _, meta, arrays = read_container(path, expect_kind="conc-series")
    return ConcentrationSeries(times=arrays["times"], fields=arrays["fields"],
                               source_meta=meta["source"])


def export_series_csv(series, path):
    """One row per node, one concentration column per stored time."""
    header = "node," + ",".join(f"t={t:g}" for t in series.times)
    data = series.fields.T
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i, row in enumerate(data):
            fh.write(f"{i}," + ",".join(repr(v) for v in row) + "\n")


def total_mass(workspace, c):
    """Integral of the concentration field over the domain."""
    return float(workspace.pressure_integral_vector() @ np.asarray(c))


def centroid(workspace, c):
    """Mass-weighted centroid of a concentration field."""
    ws = workspace
    cq = np.einsum("iq,ci->cq", ws.phi1, np.asarray(c)[ws.cell_p1])
    w = np.einsum("q,c,cq->c", ws.wq, ws.det, cq)
    wx = np.einsum("q,c,cq,cqk->k", ws.wq, ws.det, cq, ws.xq)
    return wx / w.sum()
