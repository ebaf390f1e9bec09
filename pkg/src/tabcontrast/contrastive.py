"""Cosine similarity, anchor/view pairing, and the NT-Xent contrastive loss.

The loss operates on a stacked embedding matrix of 2N rows: rows 0..N-1 are
anchor embeddings, rows N..2N-1 the matching corrupted-view embeddings.
Similarities and the loss are computed in float64 regardless of the input
dtype; the gradient is returned in float64 and cast by the caller.
"""
from __future__ import annotations

import numpy as np

NORM_GUARD = 1e-12


def pair_index(i: int, n: int) -> int:
    """Index of the pairing embedding, 0-based: anchors i < n pair with i + n."""
    if not 0 <= i < 2 * n:
        raise IndexError(f"pair_index: i={i} outside [0, {2 * n})")
    return (i + n) % (2 * n)


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """a.b / (|a||b|), norms guarded below by 1e-12 so zero vectors stay finite."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = max(float(np.linalg.norm(a)), NORM_GUARD)
    nb = max(float(np.linalg.norm(b)), NORM_GUARD)
    return float(a @ b) / (na * nb)


def _normalize_rows(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(z, axis=1)
    guarded = np.maximum(norms, NORM_GUARD)
    return z / guarded[:, None], guarded


def ntxent_loss(z_hat: np.ndarray, tau: float = 1.0) -> tuple[float, np.ndarray]:
    """NT-Xent loss over 2N stacked embeddings and its gradient w.r.t. z_hat.

    L = (1/2N) sum_i -log( exp(s[i, pair(i)]/tau) / sum_{j != i} exp(s[i, j]/tau) )

    with s the cosine-similarity matrix of the rows. Log-sum-exp uses
    max-subtraction. Returns (loss, dL/dz_hat) with dL in float64.
    """
    if tau <= 0.0:
        raise ValueError("temperature must be positive")
    z = np.asarray(z_hat, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] % 2 != 0 or z.shape[0] == 0:
        raise ValueError("z_hat must be a (2N, d) matrix")
    two_n = z.shape[0]
    n = two_n // 2

    a, norms = _normalize_rows(z)
    s = a @ a.T  # s[i, j] = cos(z_i, z_j); diagonal excluded from every denominator
    logits = s / tau
    np.fill_diagonal(logits, -np.inf)

    pair = (np.arange(two_n) + n) % two_n
    row_max = logits.max(axis=1)
    shifted = np.exp(logits - row_max[:, None])
    denom = shifted.sum(axis=1)
    # per-row term: -logits[i, pair(i)] + logsumexp_j(logits[i, j])
    lse = row_max + np.log(denom)
    terms = lse - logits[np.arange(two_n), pair]
    loss = float(terms.mean())

    # dL/d logits = (softmax over j != i) - indicator(j == pair(i)), scaled by 1/2N
    w = shifted / denom[:, None]
    w[np.arange(two_n), pair] -= 1.0
    g_s = w / (tau * two_n)  # dL/ds[i, j], zero diagonal by construction

    # s = A A^T with independent entries s[i, j] = a_i . a_j  =>  dL/dA = (G + G^T) A
    g_a = (g_s + g_s.T) @ a
    # through row normalization a = z / r: rows with true norm above the guard
    # project out the radial component; guarded rows divide by the constant.
    radial = np.einsum("ij,ij->i", g_a, a)
    true_norms = np.linalg.norm(z, axis=1)
    live = true_norms > NORM_GUARD
    g_z = g_a.copy()
    g_z[live] -= radial[live, None] * a[live]
    g_z /= norms[:, None]
    return loss, g_z
