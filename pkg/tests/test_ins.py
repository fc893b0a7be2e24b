import numpy as np
import pytest
from scipy.integrate import dblquad

from windrom.errors import AssemblyError, MeshValidationError, NonconvergenceError
from windrom.fem import FemWorkspace, p2_basis, p2_grads
from windrom.ins import (InsProblem, NewtonOptions, ParameterPoint, assemble_ins,
                         divergence_norm, load_flow_solution, reynolds_number,
                         save_flow_solution, solve_steady_ins)
from windrom.mesh import Mesh, build_taylor_hood, unit_square_mesh

from conftest import cavity_mesh, parabolic_profile, regularized_lid


# -- assembly ----------------------------------------------------------------

def test_zero_state_convection_vanishes(small_fom):
    system = assemble_ins(small_fom, np.zeros(small_fom.space.n_velocity_dofs))
    assert system.C.nnz == 0 or abs(system.C).max() < 1e-15


def test_convection_against_independent_quadrature():
    """One-element convection entries vs adaptive 2-D quadrature."""
    mesh = Mesh(vertices=[[0.1, 0.2], [1.3, 0.4], [0.5, 1.7]], triangles=[[0, 1, 2]],
                boundary_edges=[[0, 1], [1, 2], [2, 0]], boundary_tags=[1, 3, 2],
                char_length=1.0)
    space = build_taylor_hood(mesh)
    ws = FemWorkspace(space)
    state = np.zeros(space.n_velocity_dofs)
    state[0::2] = 1.0                      # constant velocity (1, 0)
    C = ws.convection(state).toarray()

    v0, v1, v2 = mesh.vertices
    jac = np.column_stack([v1 - v0, v2 - v0])
    det = np.linalg.det(jac)
    inv_t = np.linalg.inv(jac).T

    def entry(i, j):
        def f(y, x):
            pt = np.array([[x, y]])
            phi = p2_basis(pt)[:, 0]
            grad = inv_t @ p2_grads(pt)[j, 0]
            return phi[i] * grad[0] * det   # (1,0) . grad phi_j * phi_i
        val, _ = dblquad(f, 0, 1, 0, lambda x: 1 - x, epsabs=1e-12)
        return val

    for i in [0, 2, 4]:
        for j in [1, 3, 5]:
            gi = 2 * space.cell_p2[0, i]
            gj = 2 * space.cell_p2[0, j]
            assert C[gi, gj] == pytest.approx(entry(i, j), abs=1e-10)


def test_diffusion_kills_linear_field(small_fom):
    """A globally linear velocity has zero discrete Laplacian rows away
    from the boundary."""
    space = small_fom.space
    xy = space.p2_coords
    u = np.zeros(space.n_velocity_dofs)
    u[0::2] = 0.3 * xy[:, 0] - 0.7 * xy[:, 1] + 0.2
    u[1::2] = -1.1 * xy[:, 0] + 0.5 * xy[:, 1]
    rows = (small_fom.A @ u)
    interior = np.setdiff1d(np.arange(space.n_p2), space.boundary_p2_nodes)
    assert np.abs(rows[2 * interior]).max() < 1e-12
    assert np.abs(rows[2 * interior + 1]).max() < 1e-12


def test_degenerate_cell_raises_assembly_error():
    mesh = unit_square_mesh(2)
    bad = np.array(mesh.vertices)
    # collapse one interior vertex onto a neighbor after validation passed
    object.__setattr__(mesh, "vertices", bad)
    bad[4] = bad[1]
    space = build_taylor_hood(mesh)
    with pytest.raises(AssemblyError) as err:
        FemWorkspace(space)
    assert "cell" in str(err.value)


# -- steady solves -----------------------------------------------------------

def test_poiseuille_exact(channel_mesh):
    u_max, nu, height, length = 1.5, 0.7, 1.0, 2.0
    prob = InsProblem(channel_mesh, nu, inflow=parabolic_profile(u_max, height))
    sol = solve_steady_ins(prob, ParameterPoint(1.0))
    xy = prob.space.p2_coords
    exact = np.zeros((prob.space.n_p2, 2))
    exact[:, 0] = 4 * u_max * xy[:, 1] * (height - xy[:, 1]) / height ** 2
    p_exact = 8 * nu * u_max / height ** 2 * (length - xy[:, 0])
    assert np.linalg.norm(sol.u - exact.ravel()) / np.linalg.norm(exact) < 1e-10
    assert (np.linalg.norm(sol.p - p_exact[: channel_mesh.n_vertices])
            / np.linalg.norm(p_exact[: channel_mesh.n_vertices])) < 1e-10


def test_discrete_divergence_bound(small_fom):
    sol = small_fom.solve_steady(ParameterPoint(6.0))
    assert divergence_norm(small_fom, sol) <= 1e-8


def test_enclosed_zero_inflow_gives_zero_flow():
    mesh = cavity_mesh(8)
    prob = InsProblem(mesh, nu=0.1, inflow=regularized_lid, enclosed_flow=True)
    sol = prob.solve_steady(ParameterPoint(0.0))
    assert np.abs(sol.u).max() < 1e-12
    assert np.abs(sol.p).max() < 1e-10


def test_enclosed_pressure_zero_mean():
    mesh = cavity_mesh(12)
    prob = InsProblem(mesh, nu=0.02, inflow=regularized_lid, enclosed_flow=True)
    sol = prob.solve_steady(ParameterPoint(1.0))
    assert abs(prob.gauge @ sol.p) < 1e-10 * np.abs(sol.p).max()


def test_newton_quadratic_tail(small_fom):
    """Residual ratios r_{k+1} / r_k^2 stay bounded near convergence."""
    sol = small_fom.solve_steady(ParameterPoint(8.0))
    hist = [r for r in sol.residual_history if r > 1e-14]
    assert len(hist) >= 3
    tail = hist[-3:]
    ratios = [tail[k + 1] / tail[k] ** 2 for k in range(len(tail) - 1)]
    assert max(ratios) < 1e3


def test_bc_linearity(small_fom):
    g1 = small_fom.dirichlet_values(ParameterPoint(3.0))
    g2 = small_fom.dirichlet_values(ParameterPoint(6.0))
    assert np.array_equal(2.0 * g1, g2)


def test_frame_symmetry_under_180_degrees():
    """Point reflection maps the w_d solution onto the w_d + 180 one."""
    from windrom.mesh import synth_urban_mesh

    mesh = synth_urban_mesh(2, 2, 0.2, outer="enclosed")
    prob = InsProblem(mesh, nu=0.3, enclosed_flow=True)
    mu_a, mu_b = ParameterPoint(3.0, 30.0), ParameterPoint(3.0, 210.0)
    ua = prob.space.velocity_nodal(prob.solve_steady(mu_a).u)
    ub = prob.space.velocity_nodal(prob.solve_steady(mu_b).u)

    xy = prob.space.p2_coords
    reflected = 1.0 - xy   # domain is the unit square, center (0.5, 0.5)
    order = np.lexsort((xy[:, 1].round(12), xy[:, 0].round(12)))
    rorder = np.lexsort((reflected[:, 1].round(12), reflected[:, 0].round(12)))
    assert np.allclose(xy[order], reflected[rorder])
    assert np.allclose(ua[order], -ub[rorder], atol=1e-8)


def test_continuation_reaches_high_speed(small_fom):
    opts = NewtonOptions(max_iterations=4, continuation_step=2.0)
    sol = small_fom.solve_steady(ParameterPoint(10.0), opts)
    assert sol.residual_norm <= opts.tolerance


def test_nonconvergence_error_carries_diagnostics(small_fom):
    opts = NewtonOptions(max_iterations=1, continuation_step=100.0)
    with pytest.raises(NonconvergenceError) as err:
        small_fom.solve_steady(ParameterPoint(10.0), opts)
    assert err.value.residual is not None


# -- Reynolds number ---------------------------------------------------------

def test_reynolds_zero_for_zero_field(small_fom):
    from windrom.ins import FlowSolution

    sol = FlowSolution(u=np.zeros(small_fom.space.n_velocity_dofs),
                       p=np.zeros(small_fom.space.n_pressure_dofs),
                       mu=ParameterPoint(0.0), newton_iterations=0, residual_norm=0.0)
    assert reynolds_number(small_fom, sol) == 0.0


def test_reynolds_matches_paper_upper_bound():
    """u_max = 20 m/s with l = 1 m and nu = 20/205 gives Re = 205."""
    mesh = unit_square_mesh(2, char_length=1.0)
    prob = InsProblem(mesh, nu=20.0 / 205.0)
    from windrom.ins import FlowSolution

    u = np.zeros(prob.space.n_velocity_dofs)
    u[0] = 20.0
    sol = FlowSolution(u=u, p=np.zeros(prob.space.n_pressure_dofs),
                       mu=ParameterPoint(1.0), newton_iterations=0, residual_norm=0.0)
    assert reynolds_number(prob, sol) == pytest.approx(205.0, rel=1e-12)


def test_reynolds_halves_when_viscosity_doubles(small_urban_mesh, small_fom):
    sol = small_fom.solve_steady(ParameterPoint(2.0))
    doubled = InsProblem(small_urban_mesh, nu=2 * small_fom.nu)
    assert reynolds_number(doubled, sol) == pytest.approx(
        0.5 * reynolds_number(small_fom, sol), rel=1e-12)


# -- problem validation and serialization ------------------------------------

def test_enclosed_mode_rejects_outflow_tag(small_urban_mesh):
    with pytest.raises(MeshValidationError):
        InsProblem(small_urban_mesh, nu=0.1, enclosed_flow=True)


def test_open_mode_requires_outflow():
    mesh = cavity_mesh(4)
    with pytest.raises(MeshValidationError):
        InsProblem(mesh, nu=0.1)


def test_flow_solution_roundtrip(tmp_path, small_fom):
    sol = small_fom.solve_steady(ParameterPoint(1.5))
    path = tmp_path / "flow.bin"
    save_flow_solution(sol, path, nu=small_fom.nu, mesh_hash="abc")
    loaded = load_flow_solution(path)
    assert np.array_equal(loaded.u, sol.u)
    assert np.array_equal(loaded.p, sol.p)
    assert loaded.mu == sol.mu
