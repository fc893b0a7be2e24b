"""Reference elements, quadrature and sparse assembly kernels.

All kernels are vectorized over cells: local element matrices are formed
with einsum against precomputed basis tables and scattered through a
single coo_matrix call. The 7-point degree-5 Gauss rule integrates every
integrand appearing in the Taylor-Hood and P1 forms exactly (highest
degree is 5, from the convective trilinear form).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError

# 7-point degree-5 rule on the reference triangle (0,0)-(1,0)-(0,1);
# weights sum to the reference area 1/2.
_A1 = 0.0597158717897698
_B1 = 0.4701420641051151
_A2 = 0.7974269853530873
_B2 = 0.1012865073234563
QUAD_POINTS = np.array([
    [1.0 / 3.0, 1.0 / 3.0],
    [_A1, _B1], [_B1, _A1], [_B1, _B1],
    [_A2, _B2], [_B2, _A2], [_B2, _B2],
])
QUAD_WEIGHTS = 0.5 * np.array([
    0.225,
    0.1323941527885062, 0.1323941527885062, 0.1323941527885062,
    0.1259391805448271, 0.1259391805448271, 0.1259391805448271,
])


def p1_basis(points):
    """P1 shape functions at reference points, shape (3, nq)."""
    x, y = points[:, 0], points[:, 1]
    return np.stack([1.0 - x - y, x, y])


P1_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # constant, (3, 2)


def p2_basis(points):
    """P2 shape functions at reference points, shape (6, nq).

    Local order: vertex functions 0-2, then midpoints of edges
    (v1,v2), (v2,v0), (v0,v1).
    """
    lam = p1_basis(points)
    l0, l1, l2 = lam
    return np.stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
    ])


def p2_grads(points):
    """Reference gradients of P2 shape functions, shape (6, nq, 2)."""
    lam = p1_basis(points)
    g = P1_GRADS
    out = np.empty((6, len(points), 2))
    for i in range(3):
        out[i] = (4 * lam[i] - 1)[:, None] * g[i]
    pairs = [(1, 2), (2, 0), (0, 1)]
    for k, (a, b) in enumerate(pairs):
        out[3 + k] = 4 * (lam[a][:, None] * g[b] + lam[b][:, None] * g[a])
    return out


class FemWorkspace:
    """Per-space geometry and basis tables shared by all assembly kernels."""

    def __init__(self, space):
        self.space = space
        mesh = space.mesh
        tris = mesh.triangles
        v = mesh.vertices
        a, b, c = v[tris[:, 0]], v[tris[:, 1]], v[tris[:, 2]]
        jac = np.stack([b - a, c - a], axis=2)  # d x_phys / d x_ref, (m, 2, 2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        if np.any(det <= 0) or np.any(~np.isfinite(det)):
            bad = int(np.argmin(det))
            raise AssemblyError(f"degenerate element jacobian in cell {bad}")
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv /= det[:, None, None]

        self.det = det
        self.wq = QUAD_WEIGHTS
        self.phi1 = p1_basis(QUAD_POINTS)                       # (3, nq)
        self.phi2 = p2_basis(QUAD_POINTS)                       # (6, nq)
        # physical gradients: grad_x = invJ^T grad_ref
        ref2 = p2_grads(QUAD_POINTS)                            # (6, nq, 2)
        self.g2 = np.einsum("cdk,iqd->ciqk", inv, ref2)         # (m, 6, nq, 2)
        self.g1 = np.einsum("cdk,id->cik", inv, P1_GRADS)       # (m, 3, 2)
        self.xq = a[:, None, :] + np.einsum("qd,cdk->cqk", QUAD_POINTS, jac)
        # longest edge per cell, used as the SUPG length scale
        self.h = np.maximum.reduce([
            np.hypot(*(b - a).T), np.hypot(*(c - b).T), np.hypot(*(a - c).T)])

        self.cell_p2 = space.cell_p2
        self.cell_p1 = mesh.triangles
        self.n_p2 = space.n_p2
        self.n_p1 = mesh.n_vertices

    # -- scatter helpers ----------------------------------------------------

    def _scatter(self, data, rows, cols, shape):
        return sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()

    def _pattern(self, conn_rows, conn_cols):
        nr, nc = conn_rows.shape[1], conn_cols.shape[1]
        rows = np.repeat(conn_rows, nc, axis=1)
        cols = np.tile(conn_cols, (1, nr))
        return rows, cols

    # -- scalar kernels -----------------------------------------------------

    def p1_mass(self):
        me = np.einsum("q,c,iq,jq->cij", self.wq, self.det, self.phi1, self.phi1)
        rows, cols = self._pattern(self.cell_p1, self.cell_p1)
        return self._scatter(me, rows, cols, (self.n_p1, self.n_p1))

    def p1_stiffness(self):
        ke = np.einsum("q,c,cik,cjk->cij", self.wq, self.det, self.g1, self.g1)
        rows, cols = self._pattern(self.cell_p1, self.cell_p1)
        return self._scatter(ke, rows, cols, (self.n_p1, self.n_p1))

    def p2_scalar_mass(self):
        me = np.einsum("q,c,iq,jq->cij", self.wq, self.det, self.phi2, self.phi2)
        rows, cols = self._pattern(self.cell_p2, self.cell_p2)
        return self._scatter(me, rows, cols, (self.n_p2, self.n_p2))

    def p2_scalar_stiffness(self):
        ke = np.einsum("q,c,ciqk,cjqk->cij", self.wq, self.det, self.g2, self.g2)
        rows, cols = self._pattern(self.cell_p2, self.cell_p2)
        return self._scatter(ke, rows, cols, (self.n_p2, self.n_p2))

    # -- velocity-field evaluation -------------------------------------------

    def velocity_at_quad(self, u):
        """Velocity values at quadrature points, (m, nq, 2)."""
        un = np.asarray(u).reshape(self.n_p2, 2)
        loc = un[self.cell_p2]                                  # (m, 6, 2)
        return np.einsum("cid,iq->cqd", loc, self.phi2)

    def velocity_grad_at_quad(self, u):
        """Velocity gradients d u_a / d x_b at quadrature points, (m, nq, 2, 2)."""
        un = np.asarray(u).reshape(self.n_p2, 2)
        loc = un[self.cell_p2]
        return np.einsum("cia,ciqb->cqab", loc, self.g2)

    # -- vector-valued (interleaved) kernels ----------------------------------

    def _vector_expand(self, scalar):
        s = scalar.tocoo()
        rows = np.concatenate([2 * s.row, 2 * s.row + 1])
        cols = np.concatenate([2 * s.col, 2 * s.col + 1])
        data = np.concatenate([s.data, s.data])
        n = 2 * scalar.shape[0]
        return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()

    def velocity_mass(self):
        return self._vector_expand(self.p2_scalar_mass())

    def velocity_stiffness(self):
        """Vector Laplacian (grad u : grad v), no viscosity factor."""
        return self._vector_expand(self.p2_scalar_stiffness())

    def divergence(self):
        """B with B[k, 2j+d] = -(psi_k, d_d phi_j); continuity rows."""
        be = -np.einsum("q,c,kq,cjqd->ckjd", self.wq, self.det, self.phi1, self.g2)
        rows = np.repeat(self.cell_p1, 12, axis=1)
        vdof = (2 * self.cell_p2[:, :, None] + np.arange(2)).reshape(-1, 12)
        cols = np.tile(vdof, (1, 3))
        return self._scatter(be, rows, cols, (self.n_p1, 2 * self.n_p2))

    def convection(self, w):
        """C(w) with entries ((w . grad) phi_j, phi_i), block-diagonal in components."""
        wq = self.velocity_at_quad(w)
        adv = np.einsum("cqd,cjqd->cjq", wq, self.g2)
        ce = np.einsum("q,c,iq,cjq->cij", self.wq, self.det, self.phi2, adv)
        rows, cols = self._pattern(self.cell_p2, self.cell_p2)
        scalar = self._scatter(ce, rows, cols, (self.n_p2, self.n_p2))
        return self._vector_expand(scalar)

    def convection_newton(self, u):
        """Linearization ((phi_j . grad) u, phi_i); couples components."""
        gu = self.velocity_grad_at_quad(u)                      # (m, nq, 2, 2)
        ne = np.einsum("q,c,iq,jq,cqab->ciajb", self.wq, self.det,
                       self.phi2, self.phi2, gu)
        vdof = 2 * self.cell_p2[:, :, None] + np.arange(2)      # (m, 6, 2)
        vdof = vdof.reshape(-1, 12)
        rows = np.repeat(vdof, 12, axis=1)
        cols = np.tile(vdof, (1, 12))
        n = 2 * self.n_p2
        return self._scatter(ne, rows, cols, (n, n))

    def convection_vector(self, u):
        """Assembled ((u . grad) u, phi_i) as a length-N_h vector."""
        uq = self.velocity_at_quad(u)
        gu = self.velocity_grad_at_quad(u)
        conv = np.einsum("cqd,cqad->cqa", uq, gu)               # (m, nq, 2)
        fe = np.einsum("q,c,iq,cqa->cia", self.wq, self.det, self.phi2, conv)
        vdof = 2 * self.cell_p2[:, :, None] + np.arange(2)
        out = np.zeros(2 * self.n_p2)
        np.add.at(out, vdof.ravel(), fe.ravel())
        return out

    def pressure_integral_vector(self):
        """m with m_k = (psi_k, 1); the zero-mean gauge functional."""
        fe = np.einsum("q,c,kq->ck", self.wq, self.det, self.phi1)
        out = np.zeros(self.n_p1)
        np.add.at(out, self.cell_p1.ravel(), fe.ravel())
        return out

    # -- P1 advection-diffusion kernels ---------------------------------------

    def supg_tau(self, u, kappa, dt):
        """Streamline-diffusion parameter per cell.

        tau = ((2|u|/h)^2 + (4 kappa/h^2)^2 + (2/dt)^2)^(-1/2) with h the
        cell diameter and |u| the cell-mean speed; dt=None drops the
        transient term.
        """
        uq = self.velocity_at_quad(u)
        speed = np.sqrt((uq ** 2).sum(axis=2)).mean(axis=1)
        terms = (2.0 * speed / self.h) ** 2 + (4.0 * kappa / self.h ** 2) ** 2
        if dt is not None:
            terms = terms + (2.0 / dt) ** 2
        return 1.0 / np.sqrt(terms)

    def ad_operators(self, u, kappa, dt, stabilized=True):
        """SUPG-stabilized mass and transport matrices for the P1 field.

        Returns (M, K) with M the mass matrix tested against the SUPG
        test function and K = diffusion + advection (+ streamline term).
        """
        uq = self.velocity_at_quad(u)                           # (m, nq, 2)
        adv = np.einsum("cqd,cjd->cjq", uq, self.g1)            # u . grad(phi_j)
        tau = self.supg_tau(u, kappa, dt) if stabilized else np.zeros(len(self.det))

        test = self.phi1[None, :, :] + tau[:, None, None] * adv     # (m, 3, nq)
        me = np.einsum("q,c,ciq,jq->cij", self.wq, self.det, test, self.phi1)
        ke = np.einsum("q,c,ciq,cjq->cij", self.wq, self.det, test, adv)
        ke += kappa * np.einsum("q,c,cik,cjk->cij", self.wq, self.det, self.g1, self.g1)

        rows, cols = self._pattern(self.cell_p1, self.cell_p1)
        shape = (self.n_p1, self.n_p1)
        return self._scatter(me, rows, cols, shape), self._scatter(ke, rows, cols, shape)
