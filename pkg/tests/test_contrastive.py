"""The vectorized loss is checked against a direct, scalar-math evaluation
of its definition, and its gradient against central finite differences."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabcontrast import cosine_sim, ntxent_loss, pair_index


def reference_loss(z: np.ndarray, tau: float) -> float:
    """Per-term evaluation with python floats; no log-sum-exp tricks."""
    z = np.asarray(z, dtype=np.float64)
    two_n = z.shape[0]
    n = two_n // 2

    def cs(a, b):
        na = max(math.sqrt(float(a @ a)), 1e-12)
        nb = max(math.sqrt(float(b @ b)), 1e-12)
        return float(a @ b) / (na * nb)

    total = 0.0
    for i in range(two_n):
        mate = (i + n) % two_n
        den = 0.0
        for j in range(two_n):
            if j != i:
                den += math.exp(cs(z[i], z[j]) / tau)
        total -= math.log(math.exp(cs(z[i], z[mate]) / tau) / den)
    return total / two_n


def test_matches_direct_definition_on_random_batches():
    rng = np.random.default_rng(50)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        d = int(rng.integers(2, 17))
        tau = float(rng.choice([0.5, 1.0, 2.0]))
        z = rng.normal(size=(2 * n, d))
        loss, grad = ntxent_loss(z, tau)
        assert abs(loss - reference_loss(z, tau)) < 1e-10
        assert loss >= -1e-12
        assert grad.shape == z.shape and grad.dtype == np.float64


def test_identical_embeddings_of_two_anchors_give_log3():
    # all four rows identical: every similarity is 1, so each term is
    # -log(e / 3e) = log 3, for any temperature
    z = np.tile(np.array([0.3, -1.2, 0.5]), (4, 1))
    loss, _ = ntxent_loss(z, tau=1.0)
    assert abs(loss - math.log(3.0)) < 1e-12
    loss_t, _ = ntxent_loss(z, tau=0.37)
    assert abs(loss_t - math.log(3.0)) < 1e-12


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(7)
    for tau in (0.5, 1.0):
        z = rng.normal(size=(8, 6))
        _, grad = ntxent_loss(z, tau)
        h = 1e-5
        numeric = np.zeros_like(z)
        for i in range(z.shape[0]):
            for j in range(z.shape[1]):
                zp = z.copy()
                zp[i, j] += h
                zm = z.copy()
                zm[i, j] -= h
                numeric[i, j] = (ntxent_loss(zp, tau)[0] - ntxent_loss(zm, tau)[0]) / (2 * h)
        rel = np.linalg.norm(grad - numeric) / max(np.linalg.norm(numeric), 1e-12)
        assert rel < 1e-4


def test_single_anchor_batch_has_zero_loss():
    # with N=1 the denominator holds only the pair term itself
    z = np.random.default_rng(3).normal(size=(2, 4))
    loss, grad = ntxent_loss(z)
    assert abs(loss) < 1e-12
    assert np.allclose(grad, 0.0, atol=1e-12)


def test_zero_rows_stay_finite():
    z = np.array([[0.0, 0.0], [1.0, 2.0], [0.0, 0.0], [3.0, -1.0]])
    loss, grad = ntxent_loss(z)
    assert np.isfinite(loss)
    assert np.isfinite(grad).all()


def test_anchor_view_permutation_invariance():
    rng = np.random.default_rng(11)
    z = rng.normal(size=(10, 5))
    n = 5
    perm = rng.permutation(n)
    z_perm = np.concatenate([z[:n][perm], z[n:][perm]], axis=0)
    a, _ = ntxent_loss(z)
    b, _ = ntxent_loss(z_perm)
    assert abs(a - b) < 1e-12


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=1, max_value=6),
    st.floats(min_value=1e-3, max_value=1e3),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_scale_invariance(n, scale, seed):
    # cosine similarity ignores row magnitude, so the loss must too
    z = np.random.default_rng(seed).normal(size=(2 * n, 4))
    a, _ = ntxent_loss(z)
    b, _ = ntxent_loss(scale * z)
    assert abs(a - b) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=20))
def test_pair_index_is_a_fixed_point_free_involution(n):
    for i in range(2 * n):
        j = pair_index(i, n)
        assert j != i
        assert 0 <= j < 2 * n
        assert pair_index(j, n) == i


def test_pair_index_range_check():
    with pytest.raises(IndexError):
        pair_index(4, 2)
    with pytest.raises(IndexError):
        pair_index(-1, 2)


def test_cosine_sim_basics():
    assert cosine_sim([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert abs(cosine_sim([1.0, 1.0], [2.0, 2.0]) - 1.0) < 1e-12
    assert cosine_sim([0.0, 0.0], [1.0, 0.0]) == 0.0  # guarded norm


def test_loss_rejects_bad_inputs():
    with pytest.raises(ValueError):
        ntxent_loss(np.zeros((3, 2)))  # odd row count
    with pytest.raises(ValueError):
        ntxent_loss(np.zeros((4, 2)), tau=0.0)
