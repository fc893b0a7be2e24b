"""Intrusive POD-Galerkin ROM with DEIM for the convective term.

Training projects the discrete operators onto the reduced spaces. The
inhomogeneous Dirichlet data is absorbed by lifting fields (one per
boundary-data component: a single field scaled by the inflow speed in
one-parameter mode, a cos/sin pair in two-parameter mode), so both the
reduced unknown and every basis mode carry homogeneous boundary values.
The velocity space is enriched with one supremizer per pressure mode to
keep the reduced saddle point solvable. The convective term, the only
non-affine piece, is approximated by DEIM: online evaluation touches a
fixed set of interpolation rows whose entries are quadratic forms in the
reduced coordinates, so the online cost is independent of the mesh.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .containers import read_container, write_container
from .errors import NonconvergenceError, TrainingError, TruncationError
from .ins import NewtonOptions, ParameterPoint
from .pod import SnapshotSet, compute_pod


# ---------------------------------------------------------------------------
# DEIM
# ---------------------------------------------------------------------------

@dataclass
class DeimData:
    """Collateral basis with greedy interpolation rows.

    reconstruct() maps the sampled entries of a vector to its DEIM
    approximation: U (P^T U)^{-1} sampled.
    """

    basis: np.ndarray        # (N, m)
    indices: np.ndarray      # (m,) unique row ids
    interpolation: np.ndarray  # (N, m) = basis @ inv(basis[indices])

    @property
    def size(self):
        return self.basis.shape[1]

    def reconstruct(self, sampled):
        return self.interpolation @ np.asarray(sampled)

    def project_interpolation(self, W):
        """W^T interpolation, the reduced image of the reconstruction."""
        return W.T @ self.interpolation


def build_deim(nonlinear_snapshots, n_deim):
    """Greedy DEIM data from snapshots of a nonlinear term.

    Accepts a SnapshotSet or a plain (N, N_s) matrix. The collateral
    basis comes from an SVD of the snapshots; if its numerical rank is
    below n_deim the error reports the attainable size.
    """
    S = nonlinear_snapshots.S if hasattr(nonlinear_snapshots, "S") else np.asarray(nonlinear_snapshots)
    U, sv, _ = np.linalg.svd(S, full_matrices=False)
    rank = int((sv > 1e-13 * max(sv[0], 1e-300)).sum())
    if n_deim > rank:
        raise TruncationError(
            f"collateral snapshots have rank {rank}, cannot build {n_deim} DEIM modes",
            attainable=rank)
    U = U[:, :n_deim]

    indices = [int(np.argmax(np.abs(U[:, 0])))]
    for i in range(1, n_deim):
        sub = U[np.asarray(indices), :i]
        coef = np.linalg.solve(sub, U[np.asarray(indices), i])
        residual = U[:, i] - U[:, :i] @ coef
        residual[np.asarray(indices)] = 0.0
        indices.append(int(np.argmax(np.abs(residual))))
    indices = np.asarray(indices)
    if len(np.unique(indices)) != n_deim:
        raise TrainingError("DEIM greedy selection stagnated on duplicate rows")
    interpolation = U @ np.linalg.inv(U[indices])
    return DeimData(basis=U, indices=indices, interpolation=interpolation)


# ---------------------------------------------------------------------------
# Artifact
# ---------------------------------------------------------------------------

@dataclass
class ReducedSolution:
    u_hat: np.ndarray
    p_hat: np.ndarray
    mu: ParameterPoint
    iterations: int
    residual: float


@dataclass
class PodgArtifact:
    """Trained Galerkin ROM; self-contained for online evaluation."""

    modes_u: np.ndarray          # (N_h, N_V) velocity modes incl. supremizers
    modes_p: np.ndarray          # (N_hp, N_P)
    sigma_u: np.ndarray
    sigma_p: np.ndarray
    lifting: np.ndarray          # (N_h, d) lifting fields
    A_rr: np.ndarray             # (N_V, N_V) viscous block
    A_rl: np.ndarray             # (N_V, d)   viscous action on the lifting
    Bt_rr: np.ndarray            # (N_V, N_P) pressure-gradient block
    B_rr: np.ndarray             # (N_P, N_V) continuity block
    B_rl: np.ndarray             # (N_P, d)
    deim_proj: np.ndarray        # (N_V, m) projected DEIM reconstruction
    deim_indices: np.ndarray     # (m,)
    conv_forms: np.ndarray       # (m, d+N_V, d+N_V) quadratic forms per DEIM row
    train_params: list
    train_coords_u: np.ndarray   # (N_V, N_s) reduced coordinates of lifted snapshots
    train_coords_p: np.ndarray   # (N_P, N_s)
    n_rb: int
    n_rb_p: int
    bounds: tuple                # (w_i lo, w_i hi)
    two_parameter: bool
    snapshot_hash: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n_velocity_modes(self):
        return self.modes_u.shape[1]

    def lift_coefficients(self, mu):
        """Boundary-data coefficients multiplying the lifting fields."""
        if self.two_parameter:
            if mu.w_d is None:
                raise ValueError("artifact is two-parameter; w_d is required")
            rad = np.deg2rad(mu.w_d)
            return np.array([mu.w_i * np.cos(rad), mu.w_i * np.sin(rad)])
        return np.array([mu.w_i])

    def is_extrapolation(self, mu):
        lo, hi = self.bounds
        return bool(mu.w_i < lo - 1e-12 or mu.w_i > hi + 1e-12)

    def lift_velocity(self, sol_or_coeff, mu=None):
        """Full-order velocity from a reduced solution."""
        if isinstance(sol_or_coeff, ReducedSolution):
            a, mu = sol_or_coeff.u_hat, sol_or_coeff.mu
        else:
            a = np.asarray(sol_or_coeff)
        return self.lifting @ self.lift_coefficients(mu) + self.modes_u @ a

    def lift_pressure(self, sol):
        return self.modes_p @ sol.p_hat

    # -- online system --------------------------------------------------------

    def _sampled_convection(self, z):
        return np.einsum("mrs,r,s->m", self.conv_forms, z, z)

    def _sampled_convection_jac(self, z):
        d = len(z) - self.n_velocity_modes
        full = np.einsum("mrs,s->mr", self.conv_forms, z) \
            + np.einsum("mrs,r->ms", self.conv_forms, z)
        return full[:, d:]

    def residual(self, a, b, mu):
        alpha = self.lift_coefficients(mu)
        z = np.concatenate([alpha, a])
        r_u = (self.A_rr @ a + self.A_rl @ alpha
               + self.deim_proj @ self._sampled_convection(z) + self.Bt_rr @ b)
        r_p = self.B_rr @ a + self.B_rl @ alpha
        return r_u, r_p

    def solve(self, mu, opts=None):
        """Newton on the reduced system, warm-started from the nearest
        training parameter's reduced coordinates."""
        opts = opts or NewtonOptions(tolerance=1e-10, max_iterations=100)
        nearest = int(np.argmin([abs(p.w_i - mu.w_i)
                                 + (0.0 if p.w_d is None or mu.w_d is None
                                    else abs((p.w_d - mu.w_d + 180) % 360 - 180) / 36.0)
                                 for p in self.train_params]))
        a = self.train_coords_u[:, nearest].copy()
        b = self.train_coords_p[:, nearest].copy()
        nv, npb = len(a), len(b)
        d = self.lifting.shape[1]

        res = np.inf
        for it in range(opts.max_iterations + 1):
            r_u, r_p = self.residual(a, b, mu)
            res = float(np.sqrt(r_u @ r_u + r_p @ r_p))
            if not np.isfinite(res):
                raise NonconvergenceError(
                    f"reduced Newton diverged at {mu}", residual=res, iterations=it)
            if res <= opts.tolerance:
                return ReducedSolution(u_hat=a, p_hat=b, mu=mu, iterations=it, residual=res)
            if it == opts.max_iterations:
                break
            z = np.concatenate([self.lift_coefficients(mu), a])
            J = np.zeros((nv + npb, nv + npb))
            J[:nv, :nv] = self.A_rr + self.deim_proj @ self._sampled_convection_jac(z)
            J[:nv, nv:] = self.Bt_rr
            J[nv:, :nv] = self.B_rr
            try:
                step = np.linalg.solve(J, -np.concatenate([r_u, r_p]))
            except np.linalg.LinAlgError as exc:
                raise NonconvergenceError(
                    f"singular reduced system at {mu}: {exc}",
                    residual=res, iterations=it) from exc
            a += step[:nv]
            b += step[nv:]
        raise NonconvergenceError(
            f"reduced Newton did not converge at {mu}",
            residual=res, iterations=opts.max_iterations)

    # -- persistence -----------------------------------------------------------

    def save(self, path):
        meta = {
            "n_rb": self.n_rb, "n_rb_p": self.n_rb_p,
            "bounds": list(self.bounds), "two_parameter": self.two_parameter,
            "train_params": [list(p.as_tuple()) for p in self.train_params],
            "snapshot_hash": self.snapshot_hash,
            "extra": self.meta,
        }
        arrays = {k: getattr(self, k) for k in [
            "modes_u", "modes_p", "sigma_u", "sigma_p", "lifting",
            "A_rr", "A_rl", "Bt_rr", "B_rr", "B_rl",
            "deim_proj", "deim_indices", "conv_forms",
            "train_coords_u", "train_coords_p"]}
        write_container(path, "podg-artifact", meta, arrays)

    @classmethod
    def load(cls, path):
        _, meta, arrays = read_container(path, expect_kind="podg-artifact")
        return cls(
            **{k: arrays[k] for k in arrays},
            train_params=[ParameterPoint(*t) for t in meta["train_params"]],
            n_rb=meta["n_rb"], n_rb_p=meta["n_rb_p"],
            bounds=tuple(meta["bounds"]), two_parameter=meta["two_parameter"],
            snapshot_hash=meta["snapshot_hash"], meta=meta.get("extra", {}),
        )


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def compute_lifting_fields(fom, two_parameter):
    """Stokes solutions carrying unit boundary data, one per component."""
    if two_parameter:
        fields = []
        for direction in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
            probe = copy.copy(fom)
            probe._inflow = lambda coords, mu, d=direction: np.tile(d, (len(coords), 1))
            u, _ = probe.solve_stokes(ParameterPoint(1.0, 0.0))
            fields.append(u)
        return np.column_stack(fields)
    u, _ = fom.solve_stokes(ParameterPoint(1.0))
    return u[:, None]


def train_podg(snapshots_u, snapshots_p, fom, n_rb, n_rb_p=None, n_deim=20,
               basis_u=None, basis_p=None, lifting=None):
    """Train the Galerkin ROM from velocity and pressure snapshot sets.

    The two sets must share their parameter list. Pass precomputed bases
    (at any size >= the requested one) and lifting fields to skip their
    recomputation when sweeping basis sizes.
    """
    if [p.as_tuple() for p in snapshots_u.parameters] != [p.as_tuple() for p in snapshots_p.parameters]:
        raise TrainingError("velocity and pressure snapshot sets must share parameters")
    n_rb_p = n_rb if n_rb_p is None else n_rb_p
    params = snapshots_u.parameters
    two_param = params[0].w_d is not None

    if lifting is None:
        lifting = compute_lifting_fields(fom, two_param)
    alphas = np.column_stack([_lift_coeffs(p, two_param) for p in params])  # (d, N_s)
    lifted = snapshots_u.S - lifting @ alphas

    lifted_set = SnapshotSet(lifted, parameters=params, kind="velocity",
                             inner_product=snapshots_u.inner_product, mass=snapshots_u.mass)
    if basis_u is None:
        basis_u = compute_pod(lifted_set, n_modes=n_rb)
    else:
        basis_u = basis_u.truncated(n_rb)
    if basis_p is None:
        basis_p = compute_pod(snapshots_p, n_modes=n_rb_p)
    else:
        basis_p = basis_p.truncated(n_rb_p)

    space = fom.space
    M_u = fom.velocity_mass
    free = fom.free_velocity
    dirichlet_mask = np.ones(space.n_velocity_dofs, dtype=bool)
    dirichlet_mask[free] = False

    V = basis_u.modes.copy()
    V[dirichlet_mask] = 0.0  # lifted modes are homogeneous up to round-off
    P = basis_p.modes
    sup = _supremizers(fom, P, V)
    Ve = np.hstack([V, sup])

    A, B = fom.A, fom.B
    A_rr = Ve.T @ (A @ Ve)
    A_rl = Ve.T @ (A @ lifting)
    Bt_rr = Ve.T @ (B.T @ P)
    B_rr = P.T @ (B @ Ve)
    B_rl = P.T @ (B @ lifting)

    # DEIM on the assembled convective vectors at the training parameters,
    # restricted to the free rows
    ws = fom.workspace
    conv_snaps = np.column_stack([ws.convection_vector(snapshots_u.S[:, k])
                                  for k in range(snapshots_u.n_snapshots)])
    conv_snaps[dirichlet_mask] = 0.0
    deim = build_deim(conv_snaps, n_deim)
    deim_proj = deim.project_interpolation(Ve)
    conv_forms = _convective_row_forms(fom, deim.indices, np.hstack([lifting, Ve]))

    train_u = Ve.T @ (M_u @ lifted)
    train_p = P.T @ (fom.pressure_mass @ snapshots_p.S)

    wis = [p.w_i for p in params]
    return PodgArtifact(
        modes_u=Ve, modes_p=P.copy(),
        sigma_u=basis_u.sigma, sigma_p=basis_p.sigma,
        lifting=lifting,
        A_rr=A_rr, A_rl=A_rl, Bt_rr=Bt_rr, B_rr=B_rr, B_rl=B_rl,
        deim_proj=deim_proj, deim_indices=deim.indices, conv_forms=conv_forms,
        train_params=list(params), train_coords_u=train_u, train_coords_p=train_p,
        n_rb=n_rb, n_rb_p=n_rb_p,
        bounds=(min(wis), max(wis)), two_parameter=two_param,
        snapshot_hash=snapshots_u.content_hash(),
        meta={"n_deim": n_deim, "nu": fom.nu},
    )


def evaluate_podg(artifact, mu, opts=None):
    """Solve the reduced system at a parameter point."""
    return artifact.solve(mu, opts)


def _lift_coeffs(p, two_param):
    if two_param:
        rad = np.deg2rad(p.w_d)
        return np.array([p.w_i * np.cos(rad), p.w_i * np.sin(rad)])
    return np.array([p.w_i])


def _supremizers(fom, P, V):
    """One M-orthonormal supremizer per pressure mode, zero on Dirichlet dofs."""
    import scipy.sparse.linalg as spla

    free = fom.free_velocity
    M = fom.velocity_mass
    lu = spla.splu(M[free][:, free].tocsc())
    rhs = (fom.B.T @ P)[free]
    out = []
    basis = [V[:, j] for j in range(V.shape[1])]
    for k in range(P.shape[1]):
        s = np.zeros(V.shape[0])
        s[free] = lu.solve(rhs[:, k])
        for q in basis:
            s -= (q @ (M @ s)) * q
        for q in basis:  # second pass for numerical orthogonality
            s -= (q @ (M @ s)) * q
        norm = np.sqrt(s @ (M @ s))
        if norm < 1e-12:
            raise TrainingError(f"supremizer {k} degenerated; reduced system would be singular")
        s /= norm
        basis.append(s)
        out.append(s)
    return np.column_stack(out) if out else np.zeros((V.shape[0], 0))


def _convective_row_forms(fom, rows, E):
    """Quadratic forms of the convective rows over the combined basis.

    For each DEIM row i (a velocity dof), Q_i[r, s] integrates
    (e_r . grad e_s)_comp(i) against the row's P2 test function, summed
    over the cells meeting the row's node. The sampled convective entry
    at the combined state z is then z^T Q_i z.
    """
    ws = fom.workspace
    space = fom.space
    ne = E.shape[1]
    cells_of_node = [[] for _ in range(space.n_p2)]
    for c, nodes in enumerate(space.cell_p2):
        for l, nd in enumerate(nodes):
            cells_of_node[nd].append((c, l))

    En = E.reshape(space.n_p2, 2, ne)
    forms = np.zeros((len(rows), ne, ne))
    for out_i, dof in enumerate(np.asarray(rows)):
        node, comp = divmod(int(dof), 2)
        Q = np.zeros((ne, ne))
        for c, l in cells_of_node[node]:
            loc = En[space.cell_p2[c]]                     # (6, 2, ne)
            vq = np.einsum("ide,iq->qde", loc, ws.phi2)    # values (nq, 2, ne)
            gq = np.einsum("ide,iqk->qdke", loc, ws.g2[c])  # grads (nq, 2, 2, ne)
            w = ws.wq * ws.det[c] * ws.phi2[l]             # (nq,)
            Q += np.einsum("q,qdr,qds->rs", w, vq, gq[:, comp])
        forms[out_i] = Q
    return forms
