"""Increment laws and overflow-safe accumulation of matrix products.

Products are carried as a unit-norm matrix plus a log scale, as a QR
(Benettin) state, or, for laws supported on generalized permutation
matrices, exactly as a permutation with log-moduli.  Every accumulator
works on stacked arrays so a chunk of independent trials advances in
lockstep; trial ``b`` only ever reads slot ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import null_space
from scipy.sparse.csgraph import connected_components

from .linalg import DomainError, as_cmatrix

LOG_SCALE_LIMIT = 1e15
RANK_TOL = 1e-300


# ---------------------------------------------------------------- scaled products


@dataclass(frozen=True)
class ScaledMatrix:
    """exp(log_scale) * mat, with ||mat|| kept equal to 1."""

    mat: np.ndarray
    log_scale: np.ndarray

    @classmethod
    def identity(cls, d: int, batch: tuple = ()) -> "ScaledMatrix":
        mat = np.broadcast_to(np.eye(d, dtype=complex), batch + (d, d)).copy()
        return cls(mat, np.zeros(batch))

    def value(self) -> np.ndarray:
        return np.exp(self.log_scale)[..., None, None] * self.mat


def _renormalize(prod: np.ndarray, log_scale) -> ScaledMatrix:
    nrm = np.linalg.norm(prod, ord=2, axis=(-2, -1))
    if np.any(nrm == 0) or not np.all(np.isfinite(nrm)):
        raise DomainError("product lost rank or overflowed during renormalization")
    new_scale = log_scale + np.log(nrm)
    if np.any(np.abs(new_scale) > LOG_SCALE_LIMIT):
        raise OverflowError("log scale left the representable window")
    return ScaledMatrix(prod / nrm[..., None, None], new_scale)


def extend_left(acc: ScaledMatrix, x: np.ndarray) -> ScaledMatrix:
    """Represent x @ (old product)."""
    return _renormalize(x @ acc.mat, acc.log_scale)


def extend_right(acc: ScaledMatrix, x: np.ndarray) -> ScaledMatrix:
    """Represent (old product) @ x."""
    return _renormalize(acc.mat @ x, acc.log_scale)


@dataclass(frozen=True)
class ScaledVector:
    vec: np.ndarray
    log_scale: np.ndarray

    @classmethod
    def start(cls, v: np.ndarray, batch: tuple = ()) -> "ScaledVector":
        v = np.asarray(v, dtype=complex)
        nrm = np.linalg.norm(v)
        vec = np.broadcast_to(v / nrm, batch + v.shape).copy()
        return cls(vec, np.zeros(batch))

    def push(self, x: np.ndarray) -> "ScaledVector":
        w = np.einsum("...ij,...j->...i", x, self.vec)
        nrm = np.linalg.norm(w, axis=-1)
        return ScaledVector(w / nrm[..., None], self.log_scale + np.log(nrm))


# ---------------------------------------------------------------- increment laws


@dataclass(frozen=True)
class IncrementLaw:
    """Finite-support law: i.i.d. with ``weights`` or a Markov chain with
    row-stochastic ``kernel`` and ``initial`` distribution over support indices."""

    kind: str
    support: tuple
    weights: np.ndarray | None = None
    kernel: np.ndarray | None = None
    initial: np.ndarray | None = None
    labels: tuple = ()

    def __post_init__(self):
        support = tuple(as_cmatrix(g) for g in self.support)
        if not support:
            raise DomainError("support must contain at least one matrix")
        d = support[0].shape[0]
        if any(g.shape != (d, d) for g in support):
            raise DomainError("support matrices must share one dimension")
        object.__setattr__(self, "support", support)
        m = len(support)
        if self.kind == "iid_finite":
            w = _prob_vector(self.weights, m, "weights")
            object.__setattr__(self, "weights", w)
        elif self.kind == "markov_finite":
            kern = np.asarray(self.kernel, dtype=float)
            if kern.shape != (m, m):
                raise DomainError(f"kernel must be {m}x{m}, got {kern.shape}")
            for i, row in enumerate(kern):
                _prob_vector(row, m, f"kernel[{i}]")
            object.__setattr__(self, "kernel", kern)
            init = _prob_vector(self.initial, m, "initial")
            object.__setattr__(self, "initial", init)
        else:
            raise DomainError(f"unknown law kind {self.kind!r}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"g{i}" for i in range(m)))

    @property
    def dim(self) -> int:
        return self.support[0].shape[0]

    @property
    def n_states(self) -> int:
        return len(self.support)

    @property
    def stack(self) -> np.ndarray:
        return np.stack(self.support)

    @property
    def is_monomial(self) -> bool:
        return all(_monomial_parts(g) is not None for g in self.support)

    def adjoint(self) -> "IncrementLaw":
        return replace(self, support=tuple(np.conj(g.T) for g in self.support))

    def scaled(self, c: float) -> "IncrementLaw":
        return replace(self, support=tuple(c * g for g in self.support))


def _prob_vector(p, m: int, name: str) -> np.ndarray:
    if p is None:
        raise DomainError(f"{name}: missing probability vector")
    p = np.asarray(p, dtype=float)
    if p.shape != (m,):
        raise DomainError(f"{name}: expected {m} entries, got shape {p.shape}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError(f"{name}: entries must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-12:
        raise DomainError(f"{name}: entries sum to {p.sum():.15g}, not 1")
    return p


def _cdf(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return c


def _draw(cdf: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cdf, u, side="right"))


def sample_step(law: IncrementLaw, rng: np.random.Generator, prev: int | None = None):
    """One draw: returns (matrix, support index).  Markov laws use the kernel
    row of ``prev``, or the initial distribution when ``prev`` is None."""
    u = rng.random()
    if law.kind == "iid_finite":
        i = _draw(_cdf(law.weights), u)
    elif prev is None:
        i = _draw(_cdf(law.initial), u)
    else:
        i = _draw(_cdf(law.kernel[prev]), u)
    return law.support[i], i


def sample_indices(law: IncrementLaw, rng: np.random.Generator, n: int) -> np.ndarray:
    """n consecutive draws; identical to n calls of :func:`sample_step`."""
    u = rng.random(n)
    if law.kind == "iid_finite":
        return np.searchsorted(_cdf(law.weights), u, side="right")
    cdfs = _cdf(law.kernel.copy())
    out = np.empty(n, dtype=np.int64)
    state = None
    init = _cdf(law.initial)
    for t in range(n):
        state = _draw(init if state is None else cdfs[state], u[t])
        out[t] = state
    return out


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Independent stream per (master_seed, trial), via SeedSequence hashing."""
    return np.random.default_rng([int(master_seed), int(trial)])


def stationary_distribution(law: IncrementLaw) -> np.ndarray:
    if law.kind != "markov_finite":
        raise DomainError("stationary distribution needs a Markov law")
    P = law.kernel
    m = P.shape[0]
    n_comp, comp = connected_components(P > 0, directed=True, connection="strong")
    if n_comp > 1:
        groups = [np.flatnonzero(comp == c).tolist() for c in range(n_comp)]
        raise DomainError(f"kernel is reducible; strongly connected classes {groups}")
    ns = null_space(P.T - np.eye(m))
    pi = np.real(ns[:, 0])
    pi = pi / pi.sum()
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    # one refinement sweep brings the residual to rounding level
    pi = pi @ P
    pi /= pi.sum()
    return pi


def is_aperiodic(kernel: np.ndarray) -> bool:
    """Primitive-matrix test (Wielandt bound (m-1)^2 + 1)."""
    A = (np.asarray(kernel) > 0).astype(float)
    m = A.shape[0]
    M = np.linalg.matrix_power(A, (m - 1) ** 2 + 1)
    return bool(np.all(M > 0))


# ---------------------------------------------------------------- QR accumulation


@dataclass(frozen=True)
class QrState:
    """Left product L = q @ diag(exp(log_r_sums)) @ tri.

    ``tri`` (unit upper triangular) is only tracked on request; with it the
    state is a complete graded factorization of the product.
    """

    q: np.ndarray
    log_r_sums: np.ndarray
    steps: int = 0
    tri: np.ndarray | None = None

    @classmethod
    def start(cls, d: int, batch: tuple = (), track_tri: bool = False) -> "QrState":
        eye = np.broadcast_to(np.eye(d, dtype=complex), batch + (d, d)).copy()
        return cls(eye, np.zeros(batch + (d,)), 0, eye.copy() if track_tri else None)


TRI_REGRADE = 1e12


def qr_step(state: QrState, x: np.ndarray) -> QrState:
    """x @ q = q' @ r with positive diagonal r; log|r_ii| added to the sums."""
    q, r = np.linalg.qr(x @ state.q)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    mod = np.abs(diag)
    if np.any(mod <= RANK_TOL):
        raise DomainError("rank collapse in QR accumulation")
    phase = diag / mod
    q = q * phase[..., None, :]
    r = np.conj(phase)[..., :, None] * r
    log_r = np.log(mod)
    tri = None
    if state.tri is not None:
        tri = _update_tri(state.tri, r, mod, state.log_r_sums)
    new = QrState(q, state.log_r_sums + log_r, state.steps + 1, tri)
    if tri is not None and np.max(np.abs(tri)) > TRI_REGRADE:
        new = _regrade(new)
    return new


def _update_tri(tri, r, mod, logd):
    # V' = D'^{-1} R D V with D' = diag(r) D: entry (i, j) = r_ij/r_ii * d_j/d_i
    expo = logd[..., None, :] - logd[..., :, None]
    scale = np.exp(np.minimum(expo, 700.0))
    e = (r / mod[..., :, None]) * scale
    e = np.triu(e)
    return e @ tri


def _regrade(state: QrState) -> QrState:
    """Refactor D V when the unit-triangular factor grows (unordered scales)."""
    top = state.log_r_sums.max(axis=-1, keepdims=True)
    t = np.exp(state.log_r_sums - top)[..., :, None] * state.tri
    q2, r2 = np.linalg.qr(t)
    diag = np.diagonal(r2, axis1=-2, axis2=-1)
    mod = np.maximum(np.abs(diag), np.finfo(float).tiny)
    phase = np.where(np.abs(diag) > 0, diag / mod, 1.0)
    q2 = q2 * phase[..., None, :]
    r2 = np.conj(phase)[..., :, None] * r2
    tri = r2 / mod[..., :, None]
    return QrState(state.q @ q2, np.log(mod) + top, state.steps, tri)


def graded_matrix(state: QrState) -> np.ndarray:
    """Dense product from a tri-tracking QR state (short products only)."""
    return state.q @ (np.exp(state.log_r_sums)[..., :, None] * state.tri)


# ---------------------------------------------------------------- return times


@dataclass(frozen=True)
class ReturnClock:
    marked_state: int
    return_times: tuple = ()


def record_return(clock: ReturnClock, step: int, index: int) -> ReturnClock:
    if index != clock.marked_state:
        return clock
    if clock.return_times and step <= clock.return_times[-1]:
        raise DomainError("return times must be strictly increasing")
    return ReturnClock(clock.marked_state, clock.return_times + (int(step),))


def return_times(indices: np.ndarray, marked_state: int) -> np.ndarray:
    """1-based steps at which the index sequence visits ``marked_state``."""
    return np.flatnonzero(np.asarray(indices) == marked_state) + 1


# ---------------------------------------------------------------- monomial products


def _monomial_parts(g: np.ndarray):
    nz = np.abs(g) > 0
    if not (np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)):
        return None
    perm = np.argmax(nz, axis=0)  # g e_j = g[perm[j], j] e_perm[j]
    entries = g[perm, np.arange(g.shape[0])]
    return perm, entries


@dataclass(frozen=True)
class MonomialProduct:
    """Exact product of generalized permutation matrices:
    P e_j = exp(log_mod[j] + i*arg[j]) e_{perm[j]}."""

    perm: np.ndarray
    log_mod: np.ndarray
    arg: np.ndarray

    @classmethod
    def identity(cls, d: int, batch: tuple = ()) -> "MonomialProduct":
        perm = np.broadcast_to(np.arange(d), batch + (d,)).copy()
        zero = np.zeros(batch + (d,))
        return cls(perm, zero, zero.copy())

    def dense(self) -> np.ndarray:
        d = self.perm.shape[-1]
        out = np.zeros(self.perm.shape + (d,), dtype=complex)
        vals = np.exp(self.log_mod + 1j * self.arg)
        batch_idx = np.indices(self.perm.shape[:-1])
        cols = np.broadcast_to(np.arange(d), self.perm.shape)
        out[(*[b[..., None] for b in batch_idx], self.perm, cols)] = vals
        return out

    def log_norm(self) -> np.ndarray:
        return self.log_mod.max(axis=-1)

    def log_singular_values(self) -> np.ndarray:
        return -np.sort(-self.log_mod, axis=-1)

    def log_eigen_moduli(self) -> np.ndarray:
        """Each cycle of length c contributes c eigenvalues of modulus
        (product of its entries)^(1/c); exact in log form."""
        perm = self.perm.reshape(-1, self.perm.shape[-1])
        logm = self.log_mod.reshape(perm.shape)
        out = np.empty_like(logm)
        for b in range(perm.shape[0]):
            out[b] = _cycle_moduli(perm[b], logm[b])
        return (-np.sort(-out, axis=-1)).reshape(self.log_mod.shape)

    def perm_code(self) -> np.ndarray:
        d = self.perm.shape[-1]
        weights = d ** np.arange(d)[::-1]
        return self.perm @ weights


def _cycle_moduli(perm: np.ndarray, logm: np.ndarray) -> np.ndarray:
    d = perm.shape[0]
    seen = np.zeros(d, bool)
    out = np.empty(d)
    for start in range(d):
        if seen[start]:
            continue
        cyc = []
        j = start
        while not seen[j]:
            seen[j] = True
            cyc.append(j)
            j = perm[j]
        out[cyc] = logm[cyc].sum() / len(cyc)
    return out


@dataclass(frozen=True)
class MonomialSupport:
    perm: np.ndarray  # (m, d)
    log_mod: np.ndarray
    arg: np.ndarray

    @classmethod
    def from_law(cls, law: IncrementLaw) -> "MonomialSupport":
        parts = [_monomial_parts(g) for g in law.support]
        if any(p is None for p in parts):
            raise DomainError("support is not monomial")
        perm = np.stack([p for p, _ in parts])
        ent = np.stack([e for _, e in parts])
        return cls(perm, np.log(np.abs(ent)), np.angle(ent))


def monomial_left(acc: MonomialProduct, sup: MonomialSupport, idx: np.ndarray) -> MonomialProduct:
    """X @ acc where X = support[idx] (stacked over the batch)."""
    xp = sup.perm[idx]
    src = acc.perm
    perm = np.take_along_axis(xp, src, axis=-1)
    log_mod = acc.log_mod + np.take_along_axis(sup.log_mod[idx], src, axis=-1)
    arg = acc.arg + np.take_along_axis(sup.arg[idx], src, axis=-1)
    return MonomialProduct(perm, log_mod, np.angle(np.exp(1j * arg)))


def monomial_right(acc: MonomialProduct, sup: MonomialSupport, idx: np.ndarray) -> MonomialProduct:
    """acc @ X where X = support[idx]."""
    xp = sup.perm[idx]
    perm = np.take_along_axis(acc.perm, xp, axis=-1)
    log_mod = sup.log_mod[idx] + np.take_along_axis(acc.log_mod, xp, axis=-1)
    arg = sup.arg[idx] + np.take_along_axis(acc.arg, xp, axis=-1)
    return MonomialProduct(perm, log_mod, np.angle(np.exp(1j * arg)))
