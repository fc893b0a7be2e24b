import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from windrom.errors import TruncationError, WindromError
from windrom.pod import (SnapshotSet, compute_pod, lift, project,
                         projection_residual, retained_energy)


def euclidean_set(S, n=None):
    n = n if n is not None else S.shape[1]
    return SnapshotSet(S, parameters=list(range(n)), inner_product="euclidean")


def test_svd_oracle_equivalence():
    rng = np.random.default_rng(42)
    S = rng.standard_normal((200, 20))
    basis = compute_pod(euclidean_set(S), n_modes=20)
    U, sv, _ = np.linalg.svd(S, full_matrices=False)
    assert subspace_angles(basis.modes, U[:, :20]).max() < 1e-8
    assert np.allclose(basis.sigma, sv ** 2, rtol=1e-10)
    # per-column match up to sign
    for i in range(20):
        d = min(np.linalg.norm(basis.modes[:, i] - U[:, i]),
                np.linalg.norm(basis.modes[:, i] + U[:, i]))
        assert d < 1e-8


def test_repeated_snapshot_is_rank_one():
    rng = np.random.default_rng(0)
    s = rng.standard_normal(50)
    S = np.tile(s[:, None], (1, 5))
    basis = compute_pod(euclidean_set(S), n_modes=1)
    assert basis.rank == 1
    unit = s / np.linalg.norm(s)
    assert min(np.linalg.norm(basis.modes[:, 0] - unit),
               np.linalg.norm(basis.modes[:, 0] + unit)) < 1e-12


def test_truncation_error_reports_attainable_rank():
    rng = np.random.default_rng(1)
    S = rng.standard_normal((40, 3)) @ rng.standard_normal((3, 8))
    with pytest.raises(TruncationError) as err:
        compute_pod(euclidean_set(S), n_modes=6)
    assert err.value.attainable == 3


def test_energy_truncation_selects_smallest_size():
    rng = np.random.default_rng(2)
    U, _ = np.linalg.qr(rng.standard_normal((60, 4)))
    S = U @ np.diag([10.0, 5.0, 1.0, 0.1]) @ rng.standard_normal((4, 12))
    full = compute_pod(euclidean_set(S), energy=1.0)
    assert full.n_rb == full.rank
    partial = compute_pod(euclidean_set(S), energy=0.9)
    cum = np.cumsum(partial.sigma) / partial.sigma.sum()
    assert cum[partial.n_rb - 1] >= 0.9
    assert partial.n_rb == 1 or cum[partial.n_rb - 2] < 0.9


def test_retained_energy_values():
    assert retained_energy([10.0, 1.0, 0.1], 3) == 1.0
    assert retained_energy([10.0, 1.0, 0.1], 0) == 0.0
    assert retained_energy([10.0, 1.0, 0.1], 1) == pytest.approx(10.0 / 11.1, rel=1e-14)
    with pytest.raises(WindromError):
        retained_energy([0.0, 0.0], 1)
    with pytest.raises(ValueError):
        retained_energy([1.0], 5)


def test_project_lift_identities():
    rng = np.random.default_rng(3)
    S = rng.standard_normal((80, 10))
    basis = compute_pod(euclidean_set(S), n_modes=6)
    # lift(project(mode)) = mode exactly
    phi = basis.modes[:, 2]
    assert np.allclose(lift(basis, project(basis, phi)), phi, atol=1e-12)
    # project o lift = identity on reduced coordinates
    a = rng.standard_normal(6)
    assert np.allclose(project(basis, lift(basis, a)), a, atol=1e-12)
    # orthogonal complement projects to zero
    x = rng.standard_normal(80)
    x -= basis.modes @ (basis.modes.T @ x)
    assert np.abs(project(basis, x)).max() < 1e-10


def test_training_residual_equals_sigma_tail():
    rng = np.random.default_rng(4)
    S = rng.standard_normal((100, 12))
    basis = compute_pod(euclidean_set(S), n_modes=5)
    delta = sum(projection_residual(basis, S[:, k]) ** 2 for k in range(12))
    tail = basis.sigma[5:].sum()
    assert delta == pytest.approx(tail, rel=1e-8)


def test_pod_beats_random_bases():
    rng = np.random.default_rng(5)
    S = rng.standard_normal((60, 10))
    basis = compute_pod(euclidean_set(S), n_modes=4)
    pod_err = sum(projection_residual(basis, S[:, k]) ** 2 for k in range(10))
    for _ in range(100):
        W, _ = np.linalg.qr(rng.standard_normal((60, 4)))
        rand_err = sum(np.linalg.norm(S[:, k] - W @ (W.T @ S[:, k])) ** 2
                       for k in range(10))
        assert rand_err >= pod_err - 1e-9


def test_column_reordering_leaves_span_invariant():
    rng = np.random.default_rng(6)
    S = rng.standard_normal((70, 9))
    b1 = compute_pod(euclidean_set(S), n_modes=4)
    perm = rng.permutation(9)
    ss2 = SnapshotSet(S[:, perm], parameters=[int(p) for p in perm],
                      inner_product="euclidean")
    b2 = compute_pod(ss2, n_modes=4)
    assert subspace_angles(b1.modes, b2.modes).max() < 1e-10


def test_mass_weighted_orthonormality_and_projection():
    rng = np.random.default_rng(7)
    S = rng.standard_normal((90, 8))
    M = sp.diags(rng.uniform(0.5, 2.0, 90)).tocsr()
    ss = SnapshotSet(S, parameters=list(range(8)), inner_product="mass", mass=M)
    basis = compute_pod(ss, n_modes=8)
    G = basis.modes.T @ (M @ basis.modes)
    assert np.abs(G - np.eye(8)).max() < 1e-10
    assert np.allclose(basis.project(basis.modes[:, 1]), np.eye(8)[1], atol=1e-10)


def test_sign_convention_is_deterministic():
    rng = np.random.default_rng(8)
    S = rng.standard_normal((50, 6))
    b1 = compute_pod(euclidean_set(S), n_modes=6)
    b2 = compute_pod(euclidean_set(S.copy()), n_modes=6)
    assert np.array_equal(b1.modes, b2.modes)
    peak = np.abs(b1.modes).argmax(axis=0)
    assert np.all(b1.modes[peak, np.arange(6)] > 0)


def test_conditioning_floor_drops_noise_modes():
    rng = np.random.default_rng(9)
    base = rng.standard_normal((80, 3)) @ rng.standard_normal((3, 10))
    S = base + 1e-9 * rng.standard_normal((80, 10))
    basis = compute_pod(euclidean_set(S), n_modes=3)
    # eigenvalues below the 1e-14 relative floor are not part of the rank
    assert basis.rank < 10


def test_snapshot_set_validation():
    with pytest.raises(ValueError):
        SnapshotSet(np.zeros((10, 3)), parameters=[1, 2], inner_product="euclidean")
    with pytest.raises(ValueError):
        SnapshotSet(np.zeros((10, 2)), parameters=[1, 1], inner_product="euclidean")
    with pytest.raises(ValueError):
        SnapshotSet(np.zeros((10, 2)), parameters=[1, 2], inner_product="mass")


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=12), st.integers(min_value=0, max_value=1000))
def test_property_orthonormal_and_energy_monotone(n_snaps, seed):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((30, n_snaps))
    basis = compute_pod(euclidean_set(S), n_modes=min(3, n_snaps))
    G = basis.modes.T @ basis.modes
    assert np.abs(G - np.eye(basis.n_rb)).max() < 1e-8
    assert np.all(np.diff(basis.sigma) <= 1e-9 * basis.sigma[0])
    energies = [retained_energy(basis.sigma, k) for k in range(basis.rank + 1)]
    assert np.all(np.diff(energies) >= -1e-12)
    assert energies[-1] == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=1000))
def test_property_projection_never_increases_norm(seed):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((40, 6))
    basis = compute_pod(euclidean_set(S), n_modes=3)
    x = rng.standard_normal(40)
    assert np.linalg.norm(basis.lift(basis.project(x))) <= np.linalg.norm(x) + 1e-10


def test_basis_serialization_roundtrip(tmp_path):
    from windrom.pod import load_basis, save_basis

    rng = np.random.default_rng(10)
    S = rng.standard_normal((60, 8))
    ss = euclidean_set(S)
    basis = compute_pod(ss, n_modes=5)
    path = tmp_path / "basis.bin"
    save_basis(basis, path)
    loaded = load_basis(path)
    assert np.array_equal(loaded.modes, basis.modes)
    assert np.array_equal(loaded.sigma, basis.sigma)
    assert loaded.inner_product == basis.inner_product
    assert loaded.snapshot_hash == ss.content_hash()
