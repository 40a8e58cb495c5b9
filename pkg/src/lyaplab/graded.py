"""Projective distances of long products below machine resolution.

A product with a large singular-value gap has attracting directions that
agree to far more than 16 digits, so distances between them cannot be read
off normalized float matrices.  Here the product is kept in graded form
``U @ diag(exp(logd)) @ W`` with ``W`` well conditioned, and every distance
is written as delta([D a], [D b]) for O(1) vectors a, b.  The wedge norm of
such a pair is a sum of terms d_i d_j (a_i b_j - a_j b_i), evaluated in log
space, so the result keeps relative accuracy however small it is.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .walk import QrState


def log_fs_graded(logd: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """log delta([D a], [D b]) with D = diag(exp(logd)), over the last axis."""
    d = a.shape[-1]
    i, j = np.triu_indices(d, 1)
    with np.errstate(divide="ignore"):
        minors = np.log(np.abs(a[..., i] * b[..., j] - a[..., j] * b[..., i]))
        log_wedge = 0.5 * logsumexp(2.0 * (minors + logd[..., i] + logd[..., j]), axis=-1)
        log_a = 0.5 * logsumexp(2.0 * (np.log(np.abs(a)) + logd), axis=-1)
        log_b = 0.5 * logsumexp(2.0 * (np.log(np.abs(b)) + logd), axis=-1)
    return np.minimum(log_wedge - log_a - log_b, 0.0)


def top_right_graded(logd: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Top right-singular vector of diag(exp(logd)) @ w."""
    top = logd.max(axis=-1, keepdims=True)
    m = np.exp(logd - top)[..., :, None] * w
    _, _, vh = np.linalg.svd(m)
    return np.conj(vh[..., 0, :])


def _matvec(m, v):
    return np.einsum("...ij,...j->...i", m, v)


def contraction_log_distance(state: QrState, v: np.ndarray) -> np.ndarray:
    """log delta(x+_L, L.[v]) for the left product L = Q D V held by ``state``."""
    t = top_right_graded(state.log_r_sums, state.tri)
    z = _matvec(state.tri, t)
    w = _matvec(state.tri, np.broadcast_to(v, z.shape))
    return log_fs_graded(state.log_r_sums, z, w)


@dataclass(frozen=True)
class RightSnapshot:
    """R_n = U @ diag(exp(logd)) @ N @ Q^*, captured from the adjoint QR state
    (which holds R_n^* = Q D V), plus the attracting direction z of R_n."""

    logd: np.ndarray
    n_tri: np.ndarray
    q: np.ndarray
    z: np.ndarray


def right_snapshot(adj: QrState) -> RightSnapshot:
    # R_n = V^* D Q^*; V^* = Q' T' and T' D = D' N' with N' unit upper triangular
    v_star = np.conj(np.swapaxes(adj.tri, -1, -2))
    _, t = np.linalg.qr(v_star)
    tdiag = np.diagonal(t, axis1=-2, axis2=-1)
    tmod = np.abs(tdiag)
    logd = adj.log_r_sums
    expo = logd[..., None, :] - logd[..., :, None]
    n_tri = np.triu((t / tdiag[..., :, None]) * np.exp(np.minimum(expo, 700.0)))
    new_logd = logd + np.log(tmod)
    tp = top_right_graded(new_logd, n_tri)
    z = _matvec(n_tri, tp)
    return RightSnapshot(new_logd, n_tri, adj.q, z)


def stabilization_log_distance(snap: RightSnapshot, m_mat: np.ndarray, s: np.ndarray) -> np.ndarray:
    """log delta(x+_{R_n M}, x+_{R_n}).

    ``m_mat`` is the (normalized) middle product M = X_{n+1}...X_{2n} and
    ``s`` a top right-singular vector of R_n M.  Then x+_{R_n M} = [R_n M s]
    = U [D N Q^* M s], which shares the frame U with x+_{R_n} = U [D z].
    """
    ms = _matvec(m_mat, s)
    ms = ms / np.linalg.norm(ms, axis=-1, keepdims=True)
    y = _matvec(snap.n_tri, _matvec(np.conj(np.swapaxes(snap.q, -1, -2)), ms))
    return log_fs_graded(snap.logd, y, snap.z)
