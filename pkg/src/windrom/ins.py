"""Steady incompressible Navier-Stokes on Taylor-Hood spaces.

The discrete saddle-point system couples a vector Laplacian, the
convective term linearized per Newton step, and the divergence
constraint. Dirichlet data is imposed by row/column elimination: the
constrained dofs carry their boundary values inside the state vector and
the reduced system is solved on the free dofs only. Enclosed-flow
problems (Dirichlet data on the whole boundary) pin the pressure through
a single zero-mean Lagrange multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonconvergenceError, SolverError, MeshValidationError
from .fem import FemWorkspace
from .mesh import BoundaryTag, build_taylor_hood


@dataclass(frozen=True)
class ParameterPoint:
    """Inflow condition: speed in m/s, optional direction in degrees."""

    w_i: float
    w_d: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.w_i) or self.w_i < 0:
            raise ValueError(f"inflow speed must be finite and >= 0, got {self.w_i}")
        if self.w_d is not None and not (0.0 <= self.w_d < 360.0):
            raise ValueError(f"direction must lie in [0, 360), got {self.w_d}")

    def as_tuple(self):
        return (self.w_i,) if self.w_d is None else (self.w_i, self.w_d)


@dataclass
class NewtonOptions:
    tolerance: float = 1e-10
    max_iterations: int = 50
    continuation_step: float = 2.5   # largest w_i increment when ramping


@dataclass
class FlowSolution:
    u: np.ndarray
    p: np.ndarray
    mu: ParameterPoint
    newton_iterations: int
    residual_norm: float
    residual_history: list = field(default_factory=list)


@dataclass
class AssembledSystem:
    """Discrete operator blocks at a given velocity state."""

    A: sp.csr_matrix          # viscous block (includes nu)
    B: sp.csr_matrix          # continuity rows
    C: sp.csr_matrix          # convection at the supplied state
    f: np.ndarray
    g: np.ndarray
    metadata: dict = field(default_factory=dict)


class InsProblem:
    """Steady INS problem bound to a mesh, viscosity and boundary data.

    inflow: callable (coords (k,2), mu) -> (k,2) Dirichlet velocity on the
    Inflow-tagged nodes; None selects the built-in profile (uniform along
    the mean inward inflow normal in one-parameter mode, the speed/angle
    vector in two-parameter mode). NoSlip nodes are always zero and win
    at corners shared with Inflow edges.
    """

    def __init__(self, mesh, nu, inflow=None, enclosed_flow=False):
        if nu <= 0:
            raise ValueError("kinematic viscosity must be positive")
        has_outflow = np.any(mesh.boundary_tags == int(BoundaryTag.OUTFLOW))
        if enclosed_flow and has_outflow:
            raise MeshValidationError("enclosed-flow problems admit no Outflow tag")
        if not enclosed_flow and not has_outflow:
            raise MeshValidationError("open-flow problems need an Outflow boundary")
        self.mesh = mesh
        self.nu = float(nu)
        self.enclosed_flow = enclosed_flow
        self.space = build_taylor_hood(mesh)
        self.workspace = FemWorkspace(self.space)
        self._inflow = inflow

        space = self.space
        noslip = space.nodes_with_tags([BoundaryTag.NOSLIP])
        inflow_nodes = space.nodes_with_tags([BoundaryTag.INFLOW])
        self.noslip_nodes = noslip
        self.inflow_nodes = np.setdiff1d(inflow_nodes, noslip)  # NoSlip wins at corners
        dirichlet = np.union1d(noslip, self.inflow_nodes)
        self.dirichlet_nodes = dirichlet
        mask = np.ones(space.n_velocity_dofs, dtype=bool)
        mask[2 * dirichlet] = False
        mask[2 * dirichlet + 1] = False
        self.free_velocity = np.nonzero(mask)[0]

        ws = self.workspace
        self.A = self.nu * ws.velocity_stiffness()
        self.B = ws.divergence()
        self.velocity_mass = ws.velocity_mass()
        self.pressure_mass = ws.p1_mass()
        self.gauge = ws.pressure_integral_vector() if enclosed_flow else None
        self._inflow_normal = self._mean_inward_normal()

    def _mean_inward_normal(self):
        edges = self.mesh.edges_with_tag(BoundaryTag.INFLOW)
        if edges.size == 0:
            return None
        v = self.mesh.vertices
        t = v[edges[:, 1]] - v[edges[:, 0]]
        # outward normal of a CCW boundary walk is (t_y, -t_x); the tagged
        # edge orientation is arbitrary, so orient against the domain side.
        n = np.column_stack([t[:, 1], -t[:, 0]])
        centers = 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])
        inward = self.mesh.vertices.mean(axis=0) - centers
        sign = np.sign((n * inward).sum(axis=1))
        n *= sign[:, None]
        mean = n.sum(axis=0)
        norm = np.hypot(*mean)
        return mean / norm if norm > 0 else None

    # -- boundary data -------------------------------------------------------

    def dirichlet_values(self, mu):
        """(len(dirichlet_nodes), 2) velocity values for a parameter point."""
        vals = np.zeros((len(self.dirichlet_nodes), 2))
        if self.inflow_nodes.size:
            coords = self.space.p2_coords[self.inflow_nodes]
            if self._inflow is not None:
                g = np.asarray(self._inflow(coords, mu), dtype=float)
            elif mu.w_d is not None:
                rad = np.deg2rad(mu.w_d)
                g = np.tile(mu.w_i * np.array([np.cos(rad), np.sin(rad)]), (len(coords), 1))
            else:
                if self._inflow_normal is None:
                    raise SolverError("mesh has no Inflow boundary and no custom profile")
                g = np.tile(mu.w_i * self._inflow_normal, (len(coords), 1))
            idx = np.searchsorted(self.dirichlet_nodes, self.inflow_nodes)
            vals[idx] = g
        return vals

    def constrained_state(self, mu):
        """Velocity vector with Dirichlet values set and free dofs zero."""
        u = np.zeros(self.space.n_velocity_dofs)
        vals = self.dirichlet_values(mu)
        u[2 * self.dirichlet_nodes] = vals[:, 0]
        u[2 * self.dirichlet_nodes + 1] = vals[:, 1]
        return u

    # -- assembly ------------------------------------------------------------

    def assemble(self, state):
        """Operator blocks of the discrete system at a velocity state."""
        C = self.workspace.convection(state)
        meta = {
            "n_velocity_dofs": self.space.n_velocity_dofs,
            "n_pressure_dofs": self.space.n_pressure_dofs,
            "nnz": {"A": self.A.nnz, "B": self.B.nnz, "C": C.nnz},
        }
        return AssembledSystem(
            A=self.A, B=self.B, C=C,
            f=np.zeros(self.space.n_velocity_dofs),
            g=np.zeros(self.space.n_pressure_dofs),
            metadata=meta,
        )

    # -- solvers ---------------------------------------------------------------

    def _linear_solve(self, K_uu, rhs_u, rhs_p, rhs_lam=0.0):
        """Solve the reduced saddle-point system for one Newton update."""
        F = self.free_velocity
        Bf = self.B[:, F].tocsr()
        if self.enclosed_flow:
            m = sp.csr_matrix(self.gauge[:, None])
            blocks = [[K_uu, Bf.T, None],
                      [Bf, None, m],
                      [None, m.T, None]]
            rhs = [rhs_u, rhs_p, np.array([rhs_lam])]
        else:
            blocks = [[K_uu, Bf.T], [Bf, None]]
            rhs = [rhs_u, rhs_p]
        K = sp.bmat(blocks, format="csc")
        try:
            lu = spla.splu(K)
        except RuntimeError as exc:
            raise SolverError(f"sparse factorization failed: {exc}") from exc
        sol = lu.solve(np.concatenate(rhs))
        if not np.all(np.isfinite(sol)):
            raise SolverError("linear solve produced non-finite values")
        nf = len(F)
        np_ = self.space.n_pressure_dofs
        dlam = sol[nf + np_] if self.enclosed_flow else 0.0
        return sol[:nf], sol[nf : nf + np_], dlam

    def _residual(self, u, p, lam=0.0):
        F = self.free_velocity
        conv = self.workspace.convection_vector(u)
        r_u = (self.A @ u + conv + self.B.T @ p)[F]
        r_p = self.B @ u
        if self.enclosed_flow:
            r_p = r_p + lam * self.gauge
            r_lam = self.gauge @ p
            return r_u, r_p, r_lam
        return r_u, r_p, 0.0

    def solve_stokes(self, mu):
        """Linear Stokes solve (convection dropped); Newton initial guess."""
        u = self.constrained_state(mu)
        F = self.free_velocity
        K_uu = self.A[F][:, F].tocsr()
        rhs_u = -(self.A @ u)[F]
        rhs_p = -(self.B @ u)
        du, p, _ = self._linear_solve(K_uu, rhs_u, rhs_p)
        u[F] += du
        return u, p

    def solve_steady(self, mu, opts=None):
        """Newton iteration with Stokes warm start and w_i continuation."""
        opts = opts or NewtonOptions()
        try:
            return self._newton(mu, opts)
        except NonconvergenceError:
            pass
        # ramp the inflow speed, reusing each converged state as the next guess
        n_steps = max(2, int(np.ceil(mu.w_i / opts.continuation_step)))
        guess = None
        sol = None
        for k in range(1, n_steps + 1):
            mu_k = ParameterPoint(mu.w_i * k / n_steps, mu.w_d)
            sol = self._newton(mu_k, opts, initial=guess)
            guess = (sol.u.copy(), sol.p.copy())
        return sol

    def _newton(self, mu, opts, initial=None):
        F = self.free_velocity
        if initial is None:
            u, p = self.solve_stokes(mu)
        else:
            u = self.constrained_state(mu)
            u[F] = initial[0][F]
            p = initial[1].copy()
        lam = 0.0

        history = []
        for it in range(opts.max_iterations + 1):
            r_u, r_p, r_lam = self._residual(u, p, lam)
            res = float(np.sqrt(np.dot(r_u, r_u) + np.dot(r_p, r_p) + r_lam ** 2))
            history.append(res)
            if not np.isfinite(res):
                raise NonconvergenceError(
                    f"Newton residual diverged at w_i={mu.w_i}", residual=res, iterations=it)
            if res <= opts.tolerance:
                return FlowSolution(u=u, p=p, mu=mu, newton_iterations=it,
                                    residual_norm=res, residual_history=history)
            if it == opts.max_iterations:
                break
            ws = self.workspace
            K = self.A + ws.convection(u) + ws.convection_newton(u)
            K_uu = K[F][:, F].tocsr()
            du, dp, dlam = self._linear_solve(K_uu, -r_u, -r_p, -r_lam)
            u[F] += du
            p += dp
            lam += dlam
        raise NonconvergenceError(
            f"Newton did not converge in {opts.max_iterations} iterations at w_i={mu.w_i}",
            residual=res, iterations=opts.max_iterations)


def assemble_ins(problem, state):
    """Assemble the operator blocks at a velocity state (module-level API)."""
    return problem.assemble(np.asarray(state, dtype=float))


def solve_steady_ins(problem, mu, opts=None):
    """Solve the steady problem at one parameter point."""
    return problem.solve_steady(mu, opts)


def reynolds_number(problem, solution):
    """Peak nodal speed times characteristic length over viscosity."""
    speeds = np.hypot(*problem.space.velocity_nodal(solution.u).T)
    return float(speeds.max() * problem.mesh.char_length / problem.nu)


def save_flow_solution(solution, path, nu=None, mesh_hash=""):
    """Write a FlowSolution to the binary container format."""
    from .containers import write_container

    meta = {
        "w_i": solution.mu.w_i,
        "w_d": solution.mu.w_d,
        "nu": nu,
        "newton_iterations": solution.newton_iterations,
        "residual_norm": solution.residual_norm,
        "mesh_hash": mesh_hash,
    }
    write_container(path, "flow-solution", meta, {"u": solution.u, "p": solution.p})


def load_flow_solution(path):
    from .containers import read_container

    _, meta, arrays = read_container(path, expect_kind="flow-solution")
    mu = ParameterPoint(meta["w_i"], meta["w_d"])
    return FlowSolution(u=arrays["u"], p=arrays["p"], mu=mu,
                        newton_iterations=meta["newton_iterations"],
                        residual_norm=meta["residual_norm"])


def divergence_norm(problem, solution):
    """Norm of the discrete divergence relative to the velocity norm."""
    bu = problem.B @ solution.u
    if problem.enclosed_flow:
        # remove the gauge component: B u is orthogonal to constants only
        # up to the multiplier construction
        w = problem.gauge / np.linalg.norm(problem.gauge)
        bu = bu - (w @ bu) * w
    return float(np.linalg.norm(bu) / max(np.linalg.norm(solution.u), 1e-300))
