import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circuit_augmentor import linalg


def random_matrix(seed, max_dim=64):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, max_dim + 1))
    n = int(rng.integers(1, max_dim + 1))
    scale = 10.0 ** rng.uniform(-3, 3)
    return rng.standard_normal((m, n)) * scale


def check_factorization(w, res, tol=1e-8):
    sigma1 = res.sigma[0] if res.sigma.size else 0.0
    scale = max(sigma1, 1.0)
    assert np.max(np.abs(res.reconstruct() - w)) <= tol * scale
    r = res.u.shape[1]
    assert np.max(np.abs(res.u.T @ res.u - np.eye(r))) <= tol
    assert np.max(np.abs(res.v.T @ res.v - np.eye(r))) <= tol
    assert np.all(np.diff(res.sigma) <= 0)  # descending
    assert np.all(res.sigma >= 0)


def test_svd_reconstructs_seeded_matrices():
    for seed in range(300):
        w = random_matrix(seed)
        check_factorization(w, linalg.svd(w))


def test_svd_matches_known_diagonal():
    w = np.diag([3.0, 2.0, 1.0])
    res = linalg.svd(w)
    assert res.sigma == pytest.approx([3.0, 2.0, 1.0], abs=1e-12)


def test_svd_rank_clamps_tiny_values():
    u = np.array([[1.0], [0.0]])
    v = np.array([[1.0], [0.0]])
    w = 5.0 * u @ v.T + 1e-15 * np.array([[0.0, 0.0], [0.0, 1.0]])
    res = linalg.svd(w)
    assert linalg.rank(res) == 1
    assert res.sigma[1] == 0.0


def test_jacobi_agrees_with_production_svd():
    for seed in range(25):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 25))
        n = int(rng.integers(1, 25))
        w = rng.standard_normal((m, n))
        res = linalg.jacobi_svd(w)
        check_factorization(w, res, tol=1e-10)
        ref = linalg.svd(w)
        assert res.sigma == pytest.approx(ref.sigma, abs=1e-10 * max(1.0, ref.sigma[0]))


def test_jacobi_handles_rank_deficiency():
    col = np.array([[1.0], [2.0], [3.0]])
    w = col @ np.array([[1.0, -2.0, 0.5, 0.0]])
    res = linalg.jacobi_svd(w)
    check_factorization(w, res, tol=1e-10)
    assert linalg.rank(res) == 1


def test_jacobi_zero_matrix():
    res = linalg.jacobi_svd(np.zeros((3, 2)))
    assert np.all(res.sigma == 0.0)
    assert np.max(np.abs(res.u.T @ res.u - np.eye(2))) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_sigma1_bounds_frobenius_norm(seed):
    w = random_matrix(seed, max_dim=12)
    sigma = linalg.svd(w).sigma
    fro = np.linalg.norm(w)
    assert sigma[0] <= fro + 1e-9 * fro
    assert fro <= np.sqrt(sigma.size) * sigma[0] + 1e-9 * fro


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_singular_values_permutation_invariant(seed):
    w = random_matrix(seed, max_dim=10)
    rng = np.random.default_rng(seed + 1)
    perm = rng.permutation(w.shape[0])
    assert linalg.svd(w[perm]).sigma == pytest.approx(linalg.svd(w).sigma, abs=1e-9)


def test_as_matrix_rejects_bad_input():
    with pytest.raises(linalg.ValidationError):
        linalg.as_matrix(np.ones(3))
    with pytest.raises(linalg.ValidationError):
        linalg.as_matrix(np.ones((0, 3)))
    with pytest.raises(linalg.ValidationError):
        linalg.as_matrix(np.array([[1.0, np.nan]]))


# ---------------------------------------------------------------------------
# power iteration


def gapped_matrix(seed, max_dim=64, gap=0.9):
    """Random matrix with sigma_2 <= gap * sigma_1; power iteration converges
    at rate (sigma_2/sigma_1)^2 per step, so a bounded gap keeps 200 cold
    steps sufficient."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, max_dim + 1))
    n = int(rng.integers(2, max_dim + 1))
    r = min(m, n)
    qm = np.linalg.qr(rng.standard_normal((m, r)))[0]
    qn = np.linalg.qr(rng.standard_normal((n, r)))[0]
    sigma = np.sort(rng.uniform(0.0, gap, size=r))[::-1]
    sigma[0] = 1.0
    scale = 10.0 ** rng.uniform(-3, 3)
    return (qm * (sigma * scale)) @ qn.T


def test_cold_power_iteration_recovers_sigma1():
    for seed in range(100):
        w = gapped_matrix(seed)
        ref = linalg.svd(w).sigma[0]
        state = linalg.init_power_state(w.shape[0], np.random.default_rng(seed + 7))
        est, _ = linalg.spectral_norm(w, state, iters=200)
        assert est == pytest.approx(ref, rel=1e-4)


def test_warm_single_step_tracks_perturbation():
    rng = np.random.default_rng(3)
    w = rng.standard_normal((32, 16))
    state = linalg.init_power_state(32, rng)
    _, state = linalg.spectral_norm(w, state, iters=100)
    w2 = w + 1e-3 * rng.standard_normal(w.shape)
    est, _ = linalg.spectral_norm(w2, state, iters=1)
    assert est == pytest.approx(linalg.svd(w2).sigma[0], rel=1e-3)


def test_power_iteration_estimate_never_exceeds_sigma1():
    for seed in range(50):
        w = random_matrix(seed, max_dim=20)
        state = linalg.init_power_state(w.shape[0], np.random.default_rng(seed))
        est, _ = linalg.spectral_norm(w, state, iters=3)
        assert est <= linalg.svd(w).sigma[0] * (1 + 1e-9)


def test_power_iteration_zero_matrix():
    state = linalg.init_power_state(4, np.random.default_rng(0))
    est, new_state = linalg.spectral_norm(np.zeros((4, 3)), state, iters=1)
    assert est == 0.0
    assert np.all(new_state.u_vec == state.u_vec)


def test_power_iteration_validation():
    state = linalg.init_power_state(4, np.random.default_rng(0))
    with pytest.raises(linalg.ValidationError):
        linalg.spectral_norm(np.ones((4, 3)), state, iters=0)
    with pytest.raises(linalg.ValidationError):
        linalg.spectral_norm(np.ones((5, 3)), state)


def test_init_power_state_unit_norm():
    state = linalg.init_power_state(16, np.random.default_rng(1))
    assert np.linalg.norm(state.u_vec) == pytest.approx(1.0, abs=1e-12)
