"""Deterministic linear algebra on GL_d(C): KAK data, projective geometry,
spectral quantities and the pointwise inequalities used by the experiments.

Most helpers accept stacked inputs of shape (..., d, d); the public
single-matrix API validates its argument and delegates to the batched code.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

DET_FLOOR = 1e-300
GAP_TOL = 1e-9
SLACK = 1e-9


class DomainError(ValueError):
    """Input outside the domain of an operation (singular, non-finite, ...)."""


class EigenSolverError(RuntimeError):
    """The eigenvalue solver failed or returned non-finite values."""


def as_cmatrix(g, check_invertible: bool = True) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
        raise DomainError(f"expected a square matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise DomainError("matrix has non-finite entries")
    if check_invertible and abs(np.linalg.det(g)) < DET_FLOOR:
        raise DomainError(f"matrix is not invertible (|det| < {DET_FLOOR:g})")
    return g


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class SvdTriple:
    """g = k @ diag(a) @ l with k, l unitary and a sorted non-increasing."""

    k: np.ndarray
    a: np.ndarray
    l: np.ndarray
    degenerate_gap: bool

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.k * self.a) @ self.l


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    rep: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.rep, dtype=complex).ravel()
        nrm = np.linalg.norm(v)
        if not np.isfinite(nrm) or nrm == 0:
            raise DomainError("projective point needs a finite nonzero vector")
        object.__setattr__(self, "rep", v / nrm)

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        return self.rep.shape == other.rep.shape and fubini_study(self, other) <= 1e-12

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ProjectiveHyperplane:
    """The hyperplane (C u)^perp, stored through its normal line [u]."""

    normal: ProjectivePoint

    def __eq__(self, other):
        if not isinstance(other, ProjectiveHyperplane):
            return NotImplemented
        return self.normal == other.normal

    __hash__ = None


@dataclass(frozen=True)
class EigenModuli:
    moduli: np.ndarray

    @property
    def rho(self) -> float:
        return float(self.moduli[0])


# ---------------------------------------------------------------- batched kernels


def svd_batch(g: np.ndarray):
    """Stacked SVD; returns (k, a, l) with g = k diag(a) l."""
    return np.linalg.svd(g)


def fs_distance(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """||v ^ w|| / (||v|| ||w||) over the last axis, from the 2x2 minors."""
    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    d = v.shape[-1]
    i, j = np.triu_indices(d, 1)
    minors = v[..., i] * w[..., j] - v[..., j] * w[..., i]
    wedge = np.sqrt(np.sum(np.abs(minors) ** 2, axis=-1))
    return np.minimum(wedge / (np.linalg.norm(v, axis=-1) * np.linalg.norm(w, axis=-1)), 1.0)


def hyperplane_distance(v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """delta([v], (C u)^perp) = |<v, u>| / (||v|| ||u||) over the last axis."""
    ip = np.abs(np.sum(np.conj(u) * v, axis=-1))
    return np.minimum(ip / (np.linalg.norm(v, axis=-1) * np.linalg.norm(u, axis=-1)), 1.0)


def attracting_rep(k: np.ndarray) -> np.ndarray:
    return k[..., :, 0]


def repelling_normal_rep(l: np.ndarray) -> np.ndarray:
    # H^< is spanned by l^{-1} e_2..e_d = l^* e_2..e_d, so its normal is l^* e_1
    return np.conj(l[..., 0, :])


def plus_hyper_distance(k: np.ndarray, l: np.ndarray) -> np.ndarray:
    """delta(x+_g, H^<_g) = |(l k)_{11}| from KAK factors."""
    return np.minimum(np.abs(np.sum(l[..., 0, :] * k[..., :, 0], axis=-1)), 1.0)


def eigvals_batch(g: np.ndarray) -> np.ndarray:
    try:
        ev = np.linalg.eigvals(g)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigenvalue solver did not converge: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise EigenSolverError("eigenvalue solver returned non-finite values")
    return ev


def spectral_radius_batch(g: np.ndarray) -> np.ndarray:
    return np.max(np.abs(eigvals_batch(g)), axis=-1)


@lru_cache(maxsize=None)
def _combos(d: int, k: int) -> np.ndarray:
    return np.array(list(combinations(range(d), k)), dtype=int).reshape(-1, k)


def compound(g: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix (matrix of k x k minors), i.e. the matrix of the
    k-th exterior power in the basis e_I, I ranging over sorted k-subsets."""
    g = np.asarray(g, dtype=complex)
    d = g.shape[-1]
    if not 1 <= k <= d:
        raise DomainError(f"exterior power k={k} out of range 1..{d}")
    if k == 1:
        return g.copy()
    idx = _combos(d, k)
    rows = idx[:, None, :, None]
    cols = idx[None, :, None, :]
    return np.linalg.det(g[..., rows, cols])


def wedge_norm(a: np.ndarray, k: int) -> np.ndarray:
    """||wedge^k g|| = a_1 ... a_k from sorted singular values a."""
    return np.prod(a[..., :k], axis=-1)


def _leq(lhs, rhs, slack: float = SLACK):
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    return lhs <= rhs + slack * scale


# ---------------------------------------------------------------- public API


def svd(g) -> SvdTriple:
    g = as_cmatrix(g)
    k, a, l = svd_batch(g)
    degenerate = bool(a.shape[0] > 1 and (a[0] - a[1]) < GAP_TOL * a[0])
    return SvdTriple(k=k, a=a, l=l, degenerate_gap=degenerate)


def attracting_point(t: SvdTriple) -> ProjectivePoint:
    return ProjectivePoint(attracting_rep(t.k))


def repelling_hyperplane(t: SvdTriple) -> ProjectiveHyperplane:
    return ProjectiveHyperplane(ProjectivePoint(repelling_normal_rep(t.l)))


def fubini_study(x: ProjectivePoint, y: ProjectivePoint) -> float:
    v, w = x.rep, y.rep
    # canonical argument order makes the result exactly symmetric
    if v.tobytes() > w.tobytes():
        v, w = w, v
    return float(fs_distance(v, w))


def dist_point_hyperplane(x: ProjectivePoint, h: ProjectiveHyperplane) -> float:
    return float(hyperplane_distance(x.rep, h.normal.rep))


def spectral_radius(g) -> float:
    return float(spectral_radius_batch(as_cmatrix(g, check_invertible=False)))


def eigen_moduli(g) -> EigenModuli:
    ev = eigvals_batch(as_cmatrix(g, check_invertible=False))
    return EigenModuli(np.sort(np.abs(ev))[::-1])


def exterior_norm(g, k: int) -> float:
    g = as_cmatrix(g, check_invertible=False)
    d = g.shape[0]
    if not 1 <= k <= d:
        raise DomainError(f"exterior power k={k} out of range 1..{d}")
    return float(wedge_norm(np.linalg.svd(g, compute_uv=False), k))


def size_N(g) -> float:
    a = np.linalg.svd(as_cmatrix(g), compute_uv=False)
    return float(max(a[0], 1.0 / a[-1]))


def transpose_pushforward(g) -> np.ndarray:
    """g -> g^*, the map defining the adjoint law."""
    return np.conj(np.swapaxes(np.asarray(g, dtype=complex), -1, -2))


# ---------------------------------------------------------------- inequality checks


@dataclass(frozen=True)
class GapLemmaCheck:
    applicable: bool
    holds: bool
    lhs: float
    rhs: float


@dataclass(frozen=True)
class InequalityCheck:
    holds: bool
    lhs: float
    rhs: float


@dataclass(frozen=True)
class RadiusBoundsCheck:
    holds: bool
    sandwich: bool
    exterior: bool
    size_bound: bool


def gap_lemma_batch(g: np.ndarray):
    """Premise delta(x+,H^<) > 2 sqrt(a2/a1); conclusion rho/||g|| >= delta/2.

    Returns (applicable, holds, lhs, rhs) with lhs = rho/||g||, rhs = delta/2;
    ``holds`` is True wherever the premise fails.
    """
    k, a, l = svd_batch(g)
    delta = plus_hyper_distance(k, l)
    ratio = a[..., 1] / a[..., 0]
    applicable = delta > 2.0 * np.sqrt(ratio)
    lhs = spectral_radius_batch(g) / a[..., 0]
    rhs = delta / 2.0
    holds = ~applicable | _leq(rhs, lhs)
    return applicable, holds, lhs, rhs


def bflm_batch(g: np.ndarray, u: np.ndarray):
    """||g^* u|| / (||g^*|| ||u||) <= delta(x+_g, (C u)^perp) + a2/a1."""
    k, a, l = svd_batch(g)
    gs_u = np.einsum("...ji,...j->...i", np.conj(g), u)
    lhs = np.linalg.norm(gs_u, axis=-1) / (a[..., 0] * np.linalg.norm(u, axis=-1))
    rhs = hyperplane_distance(attracting_rep(k), u) + a[..., 1] / a[..., 0]
    return _leq(lhs, rhs), lhs, rhs


def contraction_batch(g: np.ndarray, v: np.ndarray):
    """delta(x+_g, g.x) <= (a2/a1) ||g|| ||v|| / ||g v||."""
    k, a, l = svd_batch(g)
    gv = np.einsum("...ij,...j->...i", g, v)
    lhs = fs_distance(attracting_rep(k), gv)
    rhs = (a[..., 1] / a[..., 0]) * a[..., 0] * np.linalg.norm(v, axis=-1) / np.linalg.norm(gv, axis=-1)
    return _leq(lhs, rhs), lhs, rhs


def radius_bounds_batch(g: np.ndarray, s: int):
    """a_d <= rho <= a_1, rho(wedge^s g) <= rho^s, 1/N <= rho <= N.

    The exterior power is formed explicitly so its spectral radius is an
    independent computation from the eigenvalues of g.
    """
    a = np.linalg.svd(g, compute_uv=False)
    rho = spectral_radius_batch(g)
    sandwich = _leq(a[..., -1], rho) & _leq(rho, a[..., 0])
    rho_s = spectral_radius_batch(compound(g, s)) if s > 1 else rho
    exterior = _leq(rho_s, rho ** s)
    n_size = np.maximum(a[..., 0], 1.0 / a[..., -1])
    size_bound = _leq(1.0 / n_size, rho) & _leq(rho, n_size)
    return sandwich, exterior, size_bound


def check_spectral_gap_lemma(g) -> GapLemmaCheck:
    g = as_cmatrix(g)
    app, holds, lhs, rhs = gap_lemma_batch(g)
    return GapLemmaCheck(bool(app), bool(holds), float(lhs), float(rhs))


def check_bflm_inequality(g, u) -> InequalityCheck:
    g = as_cmatrix(g)
    u = np.asarray(u, dtype=complex)
    if u.shape != (g.shape[0],) or not np.any(u):
        raise DomainError("u must be a nonzero vector of matching dimension")
    holds, lhs, rhs = bflm_batch(g, u)
    return InequalityCheck(bool(holds), float(lhs), float(rhs))


def check_contraction_inequality(g, x: ProjectivePoint) -> InequalityCheck:
    g = as_cmatrix(g)
    holds, lhs, rhs = contraction_batch(g, x.rep)
    return InequalityCheck(bool(holds), float(lhs), float(rhs))


def check_basic_radius_bounds(g, s: int) -> RadiusBoundsCheck:
    g = as_cmatrix(g)
    if not 1 <= s <= g.shape[0]:
        raise DomainError(f"s={s} out of range 1..{g.shape[0]}")
    sw, ex, sz = (bool(x) for x in radius_bounds_batch(g, s))
    return RadiusBoundsCheck(sw and ex and sz, sw, ex, sz)
