"""Reduced bases from snapshot matrices.

The basis comes from the small N_s x N_s correlation eigenproblem, never
from a decomposition of the N_h x N_h side. The correlation matrix is
formed in the declared inner product (mass-weighted by default, plain
Euclidean as a cross-check option) and eigenvalues below a relative
floor are dropped before the division by the singular values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .containers import array_hash
from .errors import TruncationError, WindromError


EIGENVALUE_FLOOR = 1e-14  # relative to the largest correlation eigenvalue


@dataclass
class SnapshotSet:
    """Solution vectors as columns, with their parameter points.

    inner_product is "mass" (needs the `mass` matrix handle) or
    "euclidean". The i-th column corresponds to parameters[i].
    """

    S: np.ndarray
    parameters: list
    kind: str = "velocity"
    inner_product: str = "mass"
    mass: object = None

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=float)
        if self.S.ndim != 2:
            raise ValueError("snapshot matrix must be 2-D (N_h x N_s)")
        if self.S.shape[1] != len(self.parameters):
            raise ValueError("snapshot count does not match parameter count")
        keys = [tuple(np.atleast_1d(getattr(p, "as_tuple", lambda: p)()).tolist())
                for p in self.parameters]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate parameter points in snapshot set")
        if self.inner_product == "mass":
            if self.mass is None:
                raise ValueError("mass-weighted snapshot sets need a mass matrix")
        elif self.inner_product != "euclidean":
            raise ValueError(f"unknown inner product {self.inner_product!r}")

    @property
    def n_snapshots(self):
        return self.S.shape[1]

    def gram(self):
        """Correlation matrix of the snapshots in the declared metric."""
        MS = self.S if self.mass is None else self.mass @ self.S
        return self.S.T @ MS

    def content_hash(self):
        params = np.array([np.atleast_1d(p.as_tuple()) if hasattr(p, "as_tuple") else np.atleast_1d(p)
                           for p in self.parameters], dtype=object)
        flat = np.concatenate([np.asarray(x, dtype=float).ravel() for x in params])
        return array_hash(self.S, flat)


@dataclass
class ReducedBasis:
    """Orthonormal modes with the correlation spectrum they came from.

    sigma holds the full descending eigenvalue list of the correlation
    matrix (the squared singular values of the snapshot matrix); modes
    keeps only the first n_rb columns.
    """

    modes: np.ndarray
    sigma: np.ndarray
    inner_product: str
    mass: object = None
    kind: str = "velocity"
    snapshot_hash: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n_rb(self):
        return self.modes.shape[1]

    @property
    def rank(self):
        return len(self.sigma)

    def project(self, x):
        """Reduced coordinates of a full-order vector: V^T M x."""
        Mx = x if self.mass is None else self.mass @ np.asarray(x)
        return self.modes.T @ Mx

    def lift(self, a):
        """Full-order vector of reduced coordinates: V a."""
        return self.modes @ np.asarray(a)

    def truncated(self, n_rb):
        if n_rb > self.n_rb:
            raise TruncationError(f"basis holds {self.n_rb} modes, requested {n_rb}",
                                  attainable=self.n_rb)
        return ReducedBasis(self.modes[:, :n_rb], self.sigma, self.inner_product,
                            self.mass, self.kind, self.snapshot_hash, dict(self.meta))


def compute_pod(snapshots, n_modes=None, energy=None):
    """Build a reduced basis by the correlation-matrix eigenproblem.

    Exactly one of n_modes / energy picks the truncation: a fixed basis
    size, or the smallest size whose retained energy reaches the
    threshold in (0, 1].
    """
    if (n_modes is None) == (energy is None):
        raise ValueError("pass exactly one of n_modes or energy")
    if energy is not None and not 0 < energy <= 1:
        raise ValueError("energy threshold must lie in (0, 1]")
    if snapshots.n_snapshots < 1:
        raise ValueError("need at least one snapshot")

    G = snapshots.gram()
    lam, psi = np.linalg.eigh(G)
    lam, psi = lam[::-1], psi[:, ::-1]
    keep = lam > EIGENVALUE_FLOOR * max(lam[0], 0.0)
    lam, psi = lam[keep], psi[:, keep]
    rank = len(lam)
    if rank == 0:
        raise TruncationError("snapshot matrix has numerical rank zero", attainable=0)

    if n_modes is None:
        cum = np.cumsum(lam) / lam.sum()
        n_modes = int(np.searchsorted(cum, energy - 1e-15) + 1)
    if n_modes > rank:
        raise TruncationError(
            f"requested {n_modes} modes but snapshot rank is {rank}", attainable=rank)

    modes = snapshots.S @ (psi[:, :n_modes] / np.sqrt(lam[:n_modes]))
    # the correlation route loses orthonormality for eigenvalues near the
    # floor (the conditioning hazard of this formulation); one modified
    # Gram-Schmidt sweep in the declared metric restores it exactly
    # without changing the span
    M = snapshots.mass
    for j in range(n_modes):
        for _ in range(2):
            for i in range(j):
                Mv = modes[:, j] if M is None else M @ modes[:, j]
                modes[:, j] -= (modes[:, i] @ Mv) * modes[:, i]
        Mv = modes[:, j] if M is None else M @ modes[:, j]
        modes[:, j] /= np.sqrt(modes[:, j] @ Mv)
    # deterministic sign: the entry of largest magnitude is positive
    flips = np.sign(modes[np.abs(modes).argmax(axis=0), np.arange(n_modes)])
    flips[flips == 0] = 1.0
    modes *= flips
    return ReducedBasis(
        modes=modes,
        sigma=lam,
        inner_product=snapshots.inner_product,
        mass=snapshots.mass,
        kind=snapshots.kind,
        snapshot_hash=snapshots.content_hash(),
    )


def retained_energy(sigma, n_rb):
    """Fraction of the correlation-spectrum sum kept by the first n_rb modes."""
    sigma = np.asarray(sigma, dtype=float)
    if len(sigma) == 0 or sigma.sum() <= 0:
        raise WindromError("retained energy undefined for an all-zero spectrum")
    if not 0 <= n_rb <= len(sigma):
        raise ValueError(f"n_rb must lie in [0, {len(sigma)}]")
    return float(sigma[:n_rb].sum() / sigma.sum())


def project(basis, x):
    return basis.project(x)


def lift(basis, a):
    return basis.lift(a)


def projection_residual(basis, x):
    """Norm of x minus its projection onto the basis, in the basis metric."""
    r = np.asarray(x) - basis.lift(basis.project(x))
    Mr = r if basis.mass is None else basis.mass @ r
    return float(np.sqrt(r @ Mr))


def save_basis(basis, path):
    """Write a ReducedBasis to the binary container format.

    The mass-matrix handle is not stored; a loaded basis can lift but
    needs the matrix reattached before projecting in the mass metric.
    """
    from .containers import write_container

    meta = {"inner_product": basis.inner_product, "kind": basis.kind,
            "snapshot_hash": basis.snapshot_hash, "extra": basis.meta}
    write_container(path, "reduced-basis", meta,
                    {"modes": basis.modes, "sigma": basis.sigma})


def load_basis(path, mass=None):
    from .containers import read_container

    _, meta, arrays = read_container(path, expect_kind="reduced-basis")
    return ReducedBasis(modes=arrays["modes"], sigma=arrays["sigma"],
                        inner_product=meta["inner_product"], mass=mass,
                        kind=meta["kind"], snapshot_hash=meta["snapshot_hash"],
                        meta=meta.get("extra", {}))
