"""Lyapunov estimates and subspace diagnostics from accumulated walk data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DomainError
from .walk import IncrementLaw, QrState

N_BATCHES = 30
GAP_FLOOR = 1e-9


@dataclass(frozen=True)
class LyapunovEstimate:
    lam: np.ndarray
    gap_index: int
    stderr: np.ndarray
    n_used: int


@dataclass(frozen=True)
class SubspaceSpec:
    """Orthonormal basis, one vector per row (shape (k, d), k may be 0)."""

    basis: np.ndarray
    dim: int

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex).reshape(-1, self.dim)
        if b.shape[0] and np.linalg.norm(b.conj() @ b.T - np.eye(b.shape[0])) > 1e-10:
            raise DomainError("subspace basis is not orthonormal")
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(cls, vectors, dim: int) -> "SubspaceSpec":
        vs = np.asarray(vectors, dtype=complex).reshape(-1, dim)
        if vs.shape[0] == 0:
            return cls(vs, dim)
        q, r = np.linalg.qr(vs.T)
        keep = np.abs(np.diagonal(r)) > 1e-12
        return cls(q[:, keep].T, dim)

    @property
    def rank(self) -> int:
        return self.basis.shape[0]


def batch_means_stderr(path: np.ndarray, n: int, n_batches: int = N_BATCHES) -> np.ndarray:
    """Standard error of path[n]/n from batch means of the increments.

    ``path`` has path[0] = 0 and path[m] the running sum after m steps; extra
    trailing axes are treated componentwise.
    """
    path = np.asarray(path, dtype=float)
    nb = min(n_batches, n)
    if nb < 2:
        return np.full(path.shape[1:], np.nan)
    size = n // nb
    edges = path[np.arange(nb + 1) * size]
    means = np.diff(edges, axis=0) / size
    return np.std(means, axis=0, ddof=1) / np.sqrt(nb)


def estimate_lambda1(log_norm_partial_sums, n: int | None = None):
    """(1/n) log ||L_n|| and its batch-means standard error."""
    path = np.asarray(log_norm_partial_sums, dtype=float)
    if n is None:
        n = path.shape[0] - 1
    if n < 1:
        raise DomainError("need at least one step")
    return float(path[n] / n), float(batch_means_stderr(path, n))


def gap_index_of(lam: np.ndarray, stderr: np.ndarray, gap_tol: float | None = None) -> int:
    if gap_tol is None:
        se = np.nan_to_num(stderr, nan=0.0)
        gap_tol = max(10.0 * float(np.max(se, initial=0.0)), GAP_FLOOR)
    gaps = lam[:-1] - lam[1:]
    hit = np.flatnonzero(gaps > gap_tol)
    return int(hit[0] + 1) if hit.size else int(lam.shape[0])


def estimate_spectrum(qr: QrState, path: np.ndarray | None = None, gap_tol: float | None = None) -> LyapunovEstimate:
    """Sorted log_r_sums / steps.  With ``path`` (running sums per step, shape
    (steps + 1, d)) the standard errors come from batch means; otherwise they
    are reported as zero."""
    n = qr.steps
    if n < 1:
        raise DomainError("QR state has no steps")
    sums = np.asarray(qr.log_r_sums, dtype=float)
    order = np.argsort(-sums, kind="stable")
    lam = sums[order] / n
    if path is not None:
        stderr = batch_means_stderr(path, n)[order]
    else:
        stderr = np.zeros_like(lam)
    return LyapunovEstimate(lam, gap_index_of(lam, stderr, gap_tol), stderr, n)


def pool_estimates(lams: np.ndarray, gap_tol: float | None = None) -> LyapunovEstimate:
    """Combine per-trial exponent vectors (shape (trials, d)); the standard
    error is the across-trial one when there are several trials."""
    lams = np.atleast_2d(np.asarray(lams, dtype=float))
    lam = lams.mean(axis=0)
    if lams.shape[0] > 1:
        stderr = lams.std(axis=0, ddof=1) / np.sqrt(lams.shape[0])
    else:
        stderr = np.zeros_like(lam)
    return LyapunovEstimate(lam, gap_index_of(lam, stderr, gap_tol), stderr, 0)


def _check_subspace(v: np.ndarray, L: SubspaceSpec) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.shape[-1] != L.dim:
        raise DomainError("vector and subspace dimensions differ")
    if L.rank >= L.dim:
        raise DomainError("subspace must be proper")
    return v


def dist_to_subspace(v, L: SubspaceSpec) -> float:
    """||v - P_L v|| / ||v||, the projective distance from [v] to [L]."""
    return float(dist_to_subspace_batch(v, L))


def dist_to_subspace_batch(v, L: SubspaceSpec) -> np.ndarray:
    v = _check_subspace(v, L)
    nrm = np.linalg.norm(v, axis=-1)
    if np.any(nrm == 0):
        raise DomainError("zero vector has no projective class")
    if L.rank == 0:
        return np.ones(v.shape[:-1])
    coef = np.einsum("kj,...j->...k", np.conj(L.basis), v)
    perp = v - np.einsum("...k,kj->...j", coef, L.basis)
    return np.minimum(np.linalg.norm(perp, axis=-1) / nrm, 1.0)


def check_invariance(L: SubspaceSpec, law: IncrementLaw, tol: float = 1e-9) -> bool:
    if L.rank == 0:
        return True
    B = L.basis.T
    P = B @ B.conj().T
    for g in law.support:
        img = g @ B
        if np.linalg.norm(img - P @ img, 2) > tol * np.linalg.norm(g, 2):
            return False
    return True
