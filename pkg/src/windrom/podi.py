"""Non-intrusive ROM: POD coefficients interpolated over the parameters.

Snapshots are projected onto the reduced basis and the parameter-to-
coefficient map is interpolated with thin-plate-spline radial basis
functions. Parameters are normalized to the unit cube before distances
are taken; the wind direction is embedded as (cos, sin) by default so
interpolation is continuous across 360 -> 0. Evaluation never touches
the full-order model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .containers import read_container, write_container
from .errors import TrainingError
from .ins import ParameterPoint
from .pod import ReducedBasis, compute_pod

REPRODUCTION_RTOL = 1e-8


def tps_kernel(d):
    """Thin-plate spline phi(d) = d^2 log d, with the continuous limit 0 at 0."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("kernel distances must be nonnegative")
    out = np.zeros_like(d)
    pos = d > 0
    out[pos] = d[pos] ** 2 * np.log(d[pos])
    return out if out.ndim else float(out)


_KERNELS = {"tps": tps_kernel}


@dataclass
class ParameterMap:
    """Affine scaling of raw parameters onto the unit cube.

    With angle embedding, a direction coordinate w_d contributes two
    embedded coordinates (cos, sin), each scaled from [-1, 1] to [0, 1].
    """

    w_i_bounds: tuple
    w_d_bounds: tuple | None = None
    angle_embedding: bool = True

    @property
    def has_direction(self):
        return self.w_d_bounds is not None

    def embed(self, mu):
        lo, hi = self.w_i_bounds
        span = hi - lo
        xi = [0.5 if span == 0 else (mu.w_i - lo) / span]
        if self.has_direction:
            if mu.w_d is None:
                raise ValueError("artifact is two-parameter; w_d is required")
            if self.angle_embedding:
                rad = np.deg2rad(mu.w_d)
                xi += [0.5 * (np.cos(rad) + 1.0), 0.5 * (np.sin(rad) + 1.0)]
            else:
                dlo, dhi = self.w_d_bounds
                dspan = dhi - dlo
                xi.append(0.5 if dspan == 0 else (mu.w_d - dlo) / dspan)
        return np.asarray(xi)

    def is_extrapolation(self, mu):
        lo, hi = self.w_i_bounds
        out = mu.w_i < lo - 1e-12 or mu.w_i > hi + 1e-12
        if self.has_direction and not self.angle_embedding:
            dlo, dhi = self.w_d_bounds
            out = out or mu.w_d < dlo - 1e-12 or mu.w_d > dhi + 1e-12
        return bool(out)

    def to_meta(self):
        return {"w_i_bounds": list(self.w_i_bounds),
                "w_d_bounds": None if self.w_d_bounds is None else list(self.w_d_bounds),
                "angle_embedding": self.angle_embedding}

    @classmethod
    def from_meta(cls, meta):
        wd = meta["w_d_bounds"]
        return cls(tuple(meta["w_i_bounds"]), None if wd is None else tuple(wd),
                   meta["angle_embedding"])


@dataclass
class PodiArtifact:
    """Everything needed to evaluate the interpolated ROM offline."""

    basis: ReducedBasis
    centers: np.ndarray          # (N_s, d) normalized training coordinates
    weights: np.ndarray          # (N_s, N_rb)
    coefficients: np.ndarray     # (N_rb, N_s) projected training snapshots
    parameters: list
    pmap: ParameterMap
    kernel: str = "tps"
    polynomial: bool = False
    poly_weights: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        # fixed memory layout keeps BLAS summation order, and therefore
        # evaluations, bitwise identical between trained and loaded artifacts
        self.centers = np.ascontiguousarray(self.centers)
        self.weights = np.ascontiguousarray(self.weights)
        self.coefficients = np.ascontiguousarray(self.coefficients)
        self.basis.modes = np.ascontiguousarray(self.basis.modes)

    @property
    def n_rb(self):
        return self.basis.n_rb

    def interpolate_coefficients(self, mu):
        xi = self.pmap.embed(mu)
        d = np.linalg.norm(self.centers - xi, axis=1)
        pi = self.weights.T @ _KERNELS[self.kernel](d)
        if self.polynomial:
            pi = pi + self.poly_weights.T @ np.concatenate([[1.0], xi])
        return pi

    def evaluate(self, mu):
        """Full-order velocity approximation V pi(mu)."""
        return self.basis.lift(self.interpolate_coefficients(mu))

    def is_extrapolation(self, mu):
        return self.pmap.is_extrapolation(mu)

    def save(self, path):
        meta = {
            "kernel": self.kernel,
            "polynomial": self.polynomial,
            "pmap": self.pmap.to_meta(),
            "parameters": [list(p.as_tuple()) for p in self.parameters],
            "inner_product": self.basis.inner_product,
            "snapshot_hash": self.basis.snapshot_hash,
            "kind": self.basis.kind,
            "extra": self.meta,
        }
        arrays = {
            "modes": self.basis.modes,
            "sigma": self.basis.sigma,
            "centers": self.centers,
            "weights": self.weights,
            "coefficients": self.coefficients,
        }
        if self.polynomial:
            arrays["poly_weights"] = self.poly_weights
        write_container(path, "podi-artifact", meta, arrays)

    @classmethod
    def load(cls, path):
        _, meta, arrays = read_container(path, expect_kind="podi-artifact")
        basis = ReducedBasis(arrays["modes"], arrays["sigma"], meta["inner_product"],
                             mass=None, kind=meta["kind"], snapshot_hash=meta["snapshot_hash"])
        params = [ParameterPoint(*t) for t in meta["parameters"]]
        return cls(
            basis=basis,
            centers=arrays["centers"],
            weights=arrays["weights"],
            coefficients=arrays["coefficients"],
            parameters=params,
            pmap=ParameterMap.from_meta(meta["pmap"]),
            kernel=meta["kernel"],
            polynomial=meta["polynomial"],
            poly_weights=arrays.get("poly_weights"),
            meta=meta.get("extra", {}),
        )


def train_podi(snapshots, n_rb, kernel="tps", angle_embedding=True, polynomial=False,
               basis=None):
    """Fit the interpolation ROM on a snapshot set.

    Training solves one RBF system shared across all coefficient rows and
    verifies the interpolation reproduces every training column before
    returning. Pass a precomputed `basis` to reuse an existing POD.
    """
    if snapshots.n_snapshots < 2:
        raise TrainingError("interpolation needs at least two snapshots")
    if kernel not in _KERNELS:
        raise TrainingError(f"unknown kernel {kernel!r}")
    params = snapshots.parameters
    w_i = [p.w_i for p in params]
    has_dir = any(p.w_d is not None for p in params)
    if has_dir and not all(p.w_d is not None for p in params):
        raise TrainingError("mixed one- and two-parameter snapshot points")
    pmap = ParameterMap(
        w_i_bounds=(min(w_i), max(w_i)),
        w_d_bounds=(min(p.w_d for p in params), max(p.w_d for p in params)) if has_dir else None,
        angle_embedding=angle_embedding,
    )
    centers = np.array([pmap.embed(p) for p in params])
    dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    collision = np.argwhere((dist < 1e-12) & ~np.eye(len(params), dtype=bool))
    if len(collision):
        i, j = collision[0]
        raise TrainingError(
            f"parameters {params[i]} and {params[j]} collide after normalization")

    if basis is None:
        basis = compute_pod(snapshots, n_modes=n_rb)
    elif basis.n_rb != n_rb:
        basis = basis.truncated(n_rb)
    coeff = basis.project(snapshots.S)            # (N_rb, N_s)

    Phi = _KERNELS[kernel](dist)

    def fit(with_poly):
        rhs = coeff.T                              # (N_s, N_rb)
        if with_poly:
            P = np.hstack([np.ones((len(params), 1)), centers])
            n, q = Phi.shape[0], P.shape[1]
            sys = np.block([[Phi, P], [P.T, np.zeros((q, q))]])
            rhs = np.vstack([rhs, np.zeros((q, rhs.shape[1]))])
            try:
                sol = scipy.linalg.solve(sys, rhs)
            except scipy.linalg.LinAlgError:
                return None
            if not np.all(np.isfinite(sol)):
                return None
            weights, poly_weights = sol[:n], sol[n:]
        else:
            try:
                weights = scipy.linalg.solve(Phi, rhs)
            except scipy.linalg.LinAlgError:
                return None
            if not np.all(np.isfinite(weights)):
                return None
            poly_weights = None
        return PodiArtifact(
            basis=basis, centers=centers, weights=weights, coefficients=coeff,
            parameters=list(params), pmap=pmap, kernel=kernel,
            polynomial=with_poly, poly_weights=poly_weights,
            meta={"n_snapshots": snapshots.n_snapshots},
        )

    def reproduces(art):
        if art is None:
            return False
        scale = max(np.linalg.norm(coeff, axis=0).max(), 1e-300)
        for k, p in enumerate(params):
            err = np.linalg.norm(art.interpolate_coefficients(p) - coeff[:, k])
            if not err <= REPRODUCTION_RTOL * scale:   # nan-safe
                return False
        return True

    # weights-only first (the printed kernel form); the polynomial tail is
    # the standard repair when that system is singular (TPS is only
    # conditionally positive definite), restoring exact reproduction
    variants = [polynomial, True] if not polynomial else [True]
    for with_poly in variants:
        art = fit(with_poly)
        if reproduces(art):
            return art
    raise TrainingError(
        "RBF system is singular or too ill-conditioned to reproduce the "
        "training coefficients, even with polynomial augmentation")


def evaluate_podi(artifact, mu):
    """Full-order velocity approximation at a parameter point."""
    return artifact.evaluate(mu)
