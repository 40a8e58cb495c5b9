"""Multi-trial Monte Carlo experiments on random matrix products.

Each ``run_*`` function draws its trials through :func:`simulate`, which
advances a chunk of trials in lockstep and records observables at the
configured checkpoints.  Trial ``t`` always uses the stream
``trial_rng(master_seed, t)``, so results do not depend on chunking or on
the number of worker processes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import binomtest

from . import graded
from .estimators import (
    LyapunovEstimate,
    SubspaceSpec,
    batch_means_stderr,
    dist_to_subspace_batch,
    pool_estimates,
)
from .linalg import (
    GAP_TOL,
    DomainError,
    bflm_batch,
    compound,
    contraction_batch,
    gap_lemma_batch,
    hyperplane_distance,
    plus_hyper_distance,
    radius_bounds_batch,
    spectral_radius_batch,
    transpose_pushforward,
)
from .walk import (
    IncrementLaw,
    MonomialProduct,
    MonomialSupport,
    QrState,
    ScaledMatrix,
    ScaledVector,
    extend_left,
    extend_right,
    monomial_left,
    monomial_right,
    qr_step,
    return_times,
    sample_indices,
    trial_rng,
)

# Engineering thresholds for the empirical D_n surrogates; the theory only
# gives summability, so these are choices, reported as such.
TAIL_THRESHOLD = 0.01
DOMINATION_TOL = 1e-12
RHO_ONE_TOL = 1e-9


@dataclass
class ScenarioConfig:
    name: str
    law: IncrementLaw
    n_max: int
    trials: int = 1
    master_seed: int = 0
    checkpoint_stride: int = 1
    checkpoint_growth: float = 1.2
    epsilons: tuple = ()
    l_mu: SubspaceSpec | None = None
    l_mu_check: SubspaceSpec | None = None
    probe_vector: np.ndarray | None = None
    walk_side: str = "left"
    extra_checkpoints: tuple = ()
    hyperplane_normal: np.ndarray | None = None
    dim: int | None = None

    def __post_init__(self):
        d = self.law.dim
        if self.dim is None:
            self.dim = d
        if self.dim != d:
            raise DomainError(f"dim={self.dim} does not match the law dimension {d}")
        if not (self.n_max >= self.checkpoint_stride >= 1):
            raise DomainError("need n_max >= checkpoint_stride >= 1")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if any(e <= 0 for e in self.epsilons):
            raise DomainError("epsilons must be positive")
        if self.walk_side not in ("left", "right"):
            raise DomainError("walk_side must be 'left' or 'right'")
        for name in ("probe_vector", "hyperplane_normal"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=complex)
                if v.shape != (d,) or not np.any(v):
                    raise DomainError(f"{name} must be a nonzero {d}-vector")
                setattr(self, name, v)
        for name in ("l_mu", "l_mu_check"):
            s = getattr(self, name)
            if s is not None and s.dim != d:
                raise DomainError(f"{name} lives in dimension {s.dim}, not {d}")

    def checkpoints(self) -> np.ndarray:
        pts = []
        n = self.checkpoint_stride
        while n < self.n_max:
            pts.append(n)
            n = max(n + self.checkpoint_stride, int(round(n * self.checkpoint_growth)))
        pts.append(self.n_max)
        pts.extend(e for e in self.extra_checkpoints if 1 <= e <= self.n_max)
        return np.unique(np.asarray(pts, dtype=int))


@dataclass
class TrajectoryRecord:
    """Observables of one trial at its checkpoints (arrays indexed by checkpoint)."""

    trial: int
    n: np.ndarray
    log_norm: np.ndarray
    log_rho: np.ndarray
    log_rho_vec: np.ndarray
    log_sv: np.ndarray
    log_det: np.ndarray
    sum_log_N: np.ndarray
    qr_sums: np.ndarray
    delta_plus_hyper: np.ndarray
    degenerate_flag: np.ndarray
    coset_label: np.ndarray
    delta_to_lmu: np.ndarray | None = None
    vector_log_growth: np.ndarray | None = None
    sequence_log_growth: np.ndarray | None = None
    log_contraction: np.ndarray | None = None
    delta_fixed_hyper: np.ndarray | None = None
    log_stabilization: np.ndarray | None = None
    log_norm_path: np.ndarray | None = None
    qr_path: np.ndarray | None = None
    indices: np.ndarray | None = None
    error: str | None = None


@dataclass
class _Options:
    geometry: bool = False
    sequence: dict | None = None  # checkpoint n -> probe vector v_n
    keep_paths: bool = True


# ---------------------------------------------------------------- engine


def _default_probe(d: int) -> np.ndarray:
    v = np.exp(1j * np.arange(d)) * (1.0 + np.arange(d))
    return v / np.linalg.norm(v)


def _simulate_chunk(cfg: ScenarioConfig, trial_ids: list, opts: _Options) -> list:
    law = cfg.law
    d = law.dim
    B = len(trial_ids)
    n_max = cfg.n_max
    ckpts = cfg.checkpoints()
    ck_pos = {int(n): i for i, n in enumerate(ckpts)}
    K = len(ckpts)
    idx = np.stack([sample_indices(law, trial_rng(cfg.master_seed, t), n_max) for t in trial_ids])

    sup = law.stack
    adj = transpose_pushforward(sup)
    left = cfg.walk_side == "left"
    mono_sup = MonomialSupport.from_law(law) if law.is_monomial else None
    comp_sup = [compound(sup, k) for k in range(2, d)]
    log_det_sup = np.log(np.abs(np.linalg.det(sup)))
    a_sup = np.linalg.svd(sup, compute_uv=False)
    log_n_sup = np.log(np.maximum(a_sup[:, 0], 1.0 / a_sup[:, -1]))

    probe = cfg.probe_vector
    probe_unit = None if probe is None else probe / np.linalg.norm(probe)
    geo_probe = probe_unit if probe_unit is not None else _default_probe(d)
    normal = cfg.hyperplane_normal if cfg.hyperplane_normal is not None else _default_probe(d)

    prod = ScaledMatrix.identity(d, (B,))
    comps = [ScaledMatrix.identity(c.shape[-1], (B,)) for c in comp_sup]
    qr = QrState.start(d, (B,), track_tri=opts.geometry)
    vec = ScaledVector.start(probe_unit, (B,)) if (probe_unit is not None and left) else None
    mono = MonomialProduct.identity(d, (B,)) if mono_sup is not None else None
    log_det = np.zeros(B)
    sum_log_n = np.zeros(B)
    pending = {}  # finishing step 2n -> (checkpoint position, snapshot, middle product)

    out = {
        "log_norm": np.zeros((K, B)),
        "log_rho": np.zeros((K, B)),
        "log_rho_vec": np.zeros((K, B, d)),
        "log_sv": np.zeros((K, B, d)),
        "log_det": np.zeros((K, B)),
        "sum_log_N": np.zeros((K, B)),
        "qr_sums": np.zeros((K, B, d)),
        "delta_plus_hyper": np.zeros((K, B)),
        "degenerate_flag": np.zeros((K, B), bool),
        "coset_label": np.full((K, B), -1, dtype=np.int64),
    }
    if cfg.l_mu is not None:
        out["delta_to_lmu"] = np.zeros((K, B))
    if probe_unit is not None:
        out["vector_log_growth"] = np.zeros((K, B))
    if opts.sequence is not None:
        out["sequence_log_growth"] = np.full((K, B), np.nan)
    if opts.geometry:
        out["log_contraction"] = np.full((K, B), np.nan)
        out["delta_fixed_hyper"] = np.zeros((K, B))
        out["log_stabilization"] = np.full((K, B), np.nan)
    norm_path = np.zeros((n_max + 1, B)) if opts.keep_paths else None
    qr_path = np.zeros((n_max + 1, B, d)) if opts.keep_paths else None

    for m in range(1, n_max + 1):
        i = idx[:, m - 1]
        x = sup[i]
        if left:
            prod = extend_left(prod, x)
            comps = [extend_left(w, c[i]) for w, c in zip(comps, comp_sup)]
            qr = qr_step(qr, x)
            if vec is not None:
                vec = vec.push(x)
            if mono is not None:
                mono = monomial_left(mono, mono_sup, i)
        else:
            prod = extend_right(prod, x)
            comps = [extend_right(w, c[i]) for w, c in zip(comps, comp_sup)]
            qr = qr_step(qr, adj[i])
            if mono is not None:
                mono = monomial_right(mono, mono_sup, i)
        for key in pending:
            pos, snap, mid = pending[key]
            pending[key] = (pos, snap, extend_right(mid, x))
        log_det = log_det + log_det_sup[i]
        sum_log_n = sum_log_n + log_n_sup[i]
        if norm_path is not None:
            norm_path[m] = prod.log_scale
            qr_path[m] = qr.log_r_sums

        if m in pending:
            pos, snap, mid = pending.pop(m)
            _, _, vh = np.linalg.svd(prod.mat)
            s = np.conj(vh[:, 0, :])
            out["log_stabilization"][pos] = graded.stabilization_log_distance(snap, mid.mat, s)

        if m not in ck_pos:
            continue
        p = ck_pos[m]
        k_, a_, l_ = np.linalg.svd(prod.mat)
        log_norm = prod.log_scale + np.log(a_[:, 0])
        out["log_norm"][p] = log_norm
        out["delta_plus_hyper"][p] = plus_hyper_distance(k_, l_)
        if d > 1:
            out["degenerate_flag"][p] = (a_[:, 0] - a_[:, 1]) < GAP_TOL * a_[:, 0]
        xplus = k_[:, :, 0]
        out["log_det"][p] = log_det
        out["sum_log_N"][p] = sum_log_n
        out["qr_sums"][p] = qr.log_r_sums
        if mono is not None:
            ev = mono.log_eigen_moduli()
            out["log_rho_vec"][p] = ev
            out["log_rho"][p] = ev[:, 0]
            out["log_sv"][p] = mono.log_singular_values()
            out["coset_label"][p] = mono.perm_code()
        else:
            # log ||wedge^k L|| and log rho(wedge^k L) for k = 1..d; consecutive
            # differences give singular values and eigenvalue moduli
            s_norm = [log_norm]
            s_rho = [prod.log_scale + np.log(spectral_radius_batch(prod.mat))]
            for w in comps:
                s_norm.append(w.log_scale + np.log(np.linalg.norm(w.mat, 2, axis=(-2, -1))))
                s_rho.append(w.log_scale + np.log(spectral_radius_batch(w.mat)))
            if d > 1:
                s_norm.append(log_det)
                s_rho.append(log_det)
            s_norm = np.stack(s_norm, axis=-1)
            s_rho = np.stack(s_rho, axis=-1)
            out["log_sv"][p] = np.diff(s_norm, axis=-1, prepend=0.0)
            out["log_rho_vec"][p] = np.diff(s_rho, axis=-1, prepend=0.0)
            out["log_rho"][p] = s_rho[:, 0]
        if cfg.l_mu is not None:
            out["delta_to_lmu"][p] = dist_to_subspace_batch(xplus, cfg.l_mu)
        if probe_unit is not None:
            if vec is not None:
                out["vector_log_growth"][p] = vec.log_scale
            else:
                pv = prod.mat @ probe_unit
                out["vector_log_growth"][p] = prod.log_scale + np.log(np.linalg.norm(pv, axis=-1))
        if opts.sequence is not None and m in opts.sequence:
            vn = np.asarray(opts.sequence[m], dtype=complex)
            pv = prod.mat @ vn
            out["sequence_log_growth"][p] = (
                prod.log_scale + np.log(np.linalg.norm(pv, axis=-1)) - np.log(np.linalg.norm(vn))
            )
        if opts.geometry:
            out["delta_fixed_hyper"][p] = hyperplane_distance(xplus, normal)
            if left:
                out["log_contraction"][p] = graded.contraction_log_distance(qr, geo_probe)
            elif 2 * m <= n_max:
                pending[2 * m] = (p, graded.right_snapshot(qr), ScaledMatrix.identity(d, (B,)))

    records = []
    for b, t in enumerate(trial_ids):
        kw = {key: val[:, b] for key, val in out.items()}
        records.append(
            TrajectoryRecord(
                trial=int(t),
                n=ckpts.copy(),
                log_norm_path=None if norm_path is None else norm_path[:, b].copy(),
                qr_path=None if qr_path is None else qr_path[:, b].copy(),
                indices=idx[b].copy(),
                **kw,
            )
        )
    return records


def _simulate_safe(cfg: ScenarioConfig, trial_ids: list, opts: _Options) -> list:
    try:
        return _simulate_chunk(cfg, trial_ids, opts)
    except (DomainError, OverflowError, FloatingPointError, np.linalg.LinAlgError) as exc:
        if len(trial_ids) == 1:
            return [_failed_record(trial_ids[0], cfg, exc)]
        # isolate the failing trial(s)
        recs = []
        for t in trial_ids:
            recs.extend(_simulate_safe(cfg, [t], opts))
        return recs


def _failed_record(trial: int, cfg: ScenarioConfig, exc: Exception) -> TrajectoryRecord:
    empty = np.zeros(0)
    d = cfg.dim
    return TrajectoryRecord(
        trial=int(trial), n=np.zeros(0, int), log_norm=empty, log_rho=empty,
        log_rho_vec=np.zeros((0, d)), log_sv=np.zeros((0, d)), log_det=empty,
        sum_log_N=empty, qr_sums=np.zeros((0, d)), delta_plus_hyper=empty,
        degenerate_flag=np.zeros(0, bool), coset_label=np.zeros(0, int),
        error=f"{type(exc).__name__}: {exc}",
    )


def simulate(cfg: ScenarioConfig, workers: int = 1, chunk_size: int = 128,
             geometry: bool = False, sequence: dict | None = None,
             keep_paths: bool = True) -> list:
    """Run every trial of ``cfg``; returns TrajectoryRecords ordered by trial."""
    opts = _Options(geometry=geometry, sequence=sequence, keep_paths=keep_paths)
    ids = list(range(cfg.trials))
    chunks = [ids[i:i + chunk_size] for i in range(0, len(ids), chunk_size)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_safe, [cfg] * len(chunks), chunks, [opts] * len(chunks)))
    else:
        parts = [_simulate_safe(cfg, c, opts) for c in chunks]
    records = [r for part in parts for r in part]
    records.sort(key=lambda r: r.trial)
    return records


def _ok(records: list) -> list:
    return [r for r in records if r.error is None]


def _stack(records: list, name: str) -> np.ndarray:
    return np.stack([getattr(r, name) for r in records])


def _failures(records: list) -> dict:
    return {r.trial: r.error for r in records if r.error is not None}


# ---------------------------------------------------------------- tail reports


@dataclass
class TailReport:
    """Empirical frequency of a named bad event per (epsilon, n)."""

    event: str
    epsilons: np.ndarray
    n: np.ndarray
    counts: np.ndarray
    totals: np.ndarray
    note: str = ""

    @property
    def freq(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.totals > 0, self.counts / np.maximum(self.totals, 1), np.nan)

    def wilson(self, confidence: float = 0.95):
        lo = np.full(self.counts.shape, np.nan)
        hi = np.full(self.counts.shape, np.nan)
        for ij in np.ndindex(self.counts.shape):
            if self.totals[ij] > 0:
                ci = binomtest(int(self.counts[ij]), int(self.totals[ij])).proportion_ci(
                    confidence_level=confidence, method="wilson")
                lo[ij], hi[ij] = ci.low, ci.high
        return lo, hi

    def at(self, eps_index: int, n: int) -> float:
        j = int(np.flatnonzero(self.n == n)[0])
        return float(self.freq[eps_index, j])


def _tail(event: str, eps: np.ndarray, ns: np.ndarray, bad: np.ndarray, valid: np.ndarray, note="") -> TailReport:
    """``bad`` and ``valid`` have shape (eps, trials, n)."""
    counts = np.sum(bad & valid, axis=1)
    totals = np.sum(valid, axis=1)
    return TailReport(event, eps, ns, counts, totals, note)


# ---------------------------------------------------------------- LLN experiments


@dataclass
class LLNResult:
    scenario: str
    n: np.ndarray
    rho_rate: dict
    norm_rate: dict
    l1_deviation: np.ndarray
    max_gap: np.ndarray
    lambda1_hat: float
    lambda1_stderr: float
    violations: dict
    failed: dict
    records: list = field(repr=False, default_factory=list)


def _stats(x: np.ndarray) -> dict:
    return {"mean": x.mean(axis=0), "std": x.std(axis=0), "min": x.min(axis=0), "max": x.max(axis=0)}


def pooled_lambda1(records: list):
    """Trial-mean of (1/n) log ||L_n|| at the last checkpoint; across-trial
    standard error, or batch means for a single trial."""
    rates = np.array([r.log_norm[-1] / r.n[-1] for r in records])
    if len(records) > 1:
        return float(rates.mean()), float(rates.std(ddof=1) / math.sqrt(len(rates)))
    r = records[0]
    se = batch_means_stderr(r.log_norm_path, int(r.n[-1])) if r.log_norm_path is not None else np.nan
    return float(rates[0]), float(se)


def invariant_violations(records: list) -> dict:
    """Counts of pointwise violations of rho <= ||.||, a_d <= rho <= a_1 and
    |log rho| <= sum log N(X_i), over all checkpoints of all trials."""
    dom = sandwich = ui = 0
    for r in records:
        tol = DOMINATION_TOL + 1e-15 * np.abs(r.log_norm)
        dom += int(np.sum(r.log_rho - r.log_norm > tol))
        lo = r.log_sv[:, -1]
        hi = r.log_sv[:, 0]
        tol_s = 1e-9 * np.maximum(1.0, np.abs(r.log_rho))
        sandwich += int(np.sum((lo - r.log_rho > tol_s) | (r.log_rho - hi > tol_s)))
        ui += int(np.sum(np.abs(r.log_rho) - r.sum_log_N > tol_s))
    return {"domination": dom, "sandwich": sandwich, "uniform_integrability": ui}


def run_lln(cfg: ScenarioConfig, workers: int = 1, records: list | None = None) -> LLNResult:
    """Per-checkpoint statistics of (1/n) log rho(L_n) and (1/n) log ||L_n||."""
    records = simulate(cfg, workers=workers) if records is None else records
    ok = _ok(records)
    if not ok:
        raise DomainError("every trial failed: " + "; ".join(_failures(records).values()))
    n = ok[0].n
    rho = _stack(ok, "log_rho") / n
    nrm = _stack(ok, "log_norm") / n
    lam, se = pooled_lambda1(ok)
    return LLNResult(
        scenario=cfg.name,
        n=n,
        rho_rate=_stats(rho),
        norm_rate=_stats(nrm),
        l1_deviation=np.mean(np.abs(rho - lam), axis=0),
        max_gap=np.max(np.abs(rho - nrm), axis=0),
        lambda1_hat=lam,
        lambda1_stderr=se,
        violations=invariant_violations(ok),
        failed=_failures(records),
        records=records,
    )


@dataclass
class EigenLLNResult:
    scenario: str
    n: np.ndarray
    rate_mean: np.ndarray  # (K, d)
    rate_std: np.ndarray
    rate_min: np.ndarray
    rate_max: np.ndarray
    spectrum: LyapunovEstimate
    spectrum_diff: np.ndarray  # final mean rate minus QR spectrum
    det_identity_error: float  # max |sum_k rate_k - (1/n) log|det L_n||
    mean_log_det_rate: float
    violations: dict
    failed: dict
    records: list = field(repr=False, default_factory=list)


def spectrum_from_records(records: list) -> LyapunovEstimate:
    """QR spectrum: per-trial sorted rates, pooled across trials (batch-means
    errors for a single trial)."""
    lams = np.stack([np.sort(r.qr_sums[-1])[::-1] / r.n[-1] for r in records])
    if len(records) == 1 and records[0].qr_path is not None:
        r = records[0]
        n = int(r.n[-1])
        order = np.argsort(-r.qr_sums[-1], kind="stable")
        se = batch_means_stderr(r.qr_path, n)[order]
        est = pool_estimates(lams)
        from .estimators import gap_index_of
        return LyapunovEstimate(est.lam, gap_index_of(est.lam, se), se, n)
    est = pool_estimates(lams)
    return LyapunovEstimate(est.lam, est.gap_index, est.stderr, int(records[0].n[-1]))


def run_eigen_vector_lln(cfg: ScenarioConfig, workers: int = 1, records: list | None = None) -> EigenLLNResult:
    records = simulate(cfg, workers=workers) if records is None else records
    ok = _ok(records)
    if not ok:
        raise DomainError("every trial failed")
    n = ok[0].n
    rates = _stack(ok, "log_rho_vec") / n[None, :, None]
    det_rate = _stack(ok, "log_det") / n
    spec = spectrum_from_records(ok)
    return EigenLLNResult(
        scenario=cfg.name,
        n=n,
        rate_mean=rates.mean(axis=0),
        rate_std=rates.std(axis=0),
        rate_min=rates.min(axis=0),
        rate_max=rates.max(axis=0),
        spectrum=spec,
        spectrum_diff=rates[:, -1, :].mean(axis=0) - spec.lam,
        det_identity_error=float(np.max(np.abs(rates.sum(axis=-1) - det_rate))),
        mean_log_det_rate=float(det_rate[:, -1].mean()),
        violations=invariant_violations(ok),
        failed=_failures(records),
        records=records,
    )


# ---------------------------------------------------------------- geometry


@dataclass
class GeometryResult:
    scenario: str
    spectrum: LyapunovEstimate
    epsilons: np.ndarray
    reports: dict
    degenerate_skipped: int
    warning: str | None
    failed: dict
    records: list = field(repr=False, default_factory=list)


def run_geometry_decay(cfg: ScenarioConfig, workers: int = 1, records: list | None = None) -> GeometryResult:
    """Tail frequencies of the projective events behind the spectral-radius LLN.

    Events (per epsilon, per checkpoint n):
      attract_repel       delta(x+_{L_n}, H^<_{L_n}) <= exp(-eps n)
      contraction         delta(x+_{L_n}, L_n.x) >= exp(-eps n)        (left walk)
      stabilization       delta(x+_{R_2n}, x+_{R_n}) >= exp(-eps n)    (right walk)
      invariant_subspace  delta(x+_{L_n}, [L_mu]) <= exp(-eps n)       (L_mu supplied)
      fixed_hyperplane    delta(x+_{L_n}, (C u)^perp) <= exp(-eps n)   (u far from L_mu_check)
    Degenerate-gap checkpoints are excluded and counted.
    """
    records = simulate(cfg, workers=workers, geometry=True) if records is None else records
    ok = _ok(records)
    if not ok:
        raise DomainError("every trial failed")
    spec = spectrum_from_records(ok)
    warning = None
    if spec.gap_index != 1:
        warning = (f"no empirical gap between the first two exponents "
                   f"(gap index {spec.gap_index}); hypotheses fail, no claim is made")
    eps = np.asarray(cfg.epsilons, dtype=float)
    if eps.size == 0:
        gap = spec.lam[0] - spec.lam[1] if spec.lam.size > 1 else 0.0
        eps = np.array([gap / 2.0]) if gap > 0 else np.array([])
    n = ok[0].n
    degenerate = _stack(ok, "degenerate_flag")
    valid = ~degenerate
    reports = {}
    note = f"engineering threshold {TAIL_THRESHOLD}; summability of D_n is not checkable"
    if eps.size and warning is None:
        thr = -eps[:, None, None] * n[None, None, :]  # log of exp(-eps n)
        with np.errstate(divide="ignore"):
            log_dph = np.log(_stack(ok, "delta_plus_hyper"))
        v = np.broadcast_to(valid, thr.shape[:1] + valid.shape)
        reports["attract_repel"] = _tail("attract_repel", eps, n, log_dph[None] <= thr, v, note)
        if cfg.walk_side == "left":
            lc = _stack(ok, "log_contraction")
            reports["contraction"] = _tail("contraction", eps, n, lc[None] >= thr, v & np.isfinite(lc)[None], note)
        else:
            ls = _stack(ok, "log_stabilization")
            # both endpoints of the pair must be non-degenerate
            v2 = np.isfinite(ls)
            reports["stabilization"] = _tail("stabilization", eps, n, ls[None] >= thr, v & v2[None], note)
        if cfg.l_mu is not None:
            with np.errstate(divide="ignore"):
                ld = np.log(_stack(ok, "delta_to_lmu"))
            reports["invariant_subspace"] = _tail("invariant_subspace", eps, n, ld[None] <= thr, v, note)
        u = cfg.hyperplane_normal if cfg.hyperplane_normal is not None else _default_probe(cfg.dim)
        lmc = cfg.l_mu_check if cfg.l_mu_check is not None else SubspaceSpec(np.zeros((0, cfg.dim)), cfg.dim)
        # the hyperplane (C u)^perp is admissible only when u is outside L_mu_check
        admissible = float(dist_to_subspace_batch(u, lmc)) > 1e-12
        with np.errstate(divide="ignore"):
            lh = np.log(_stack(ok, "delta_fixed_hyper"))
        reports["fixed_hyperplane"] = _tail("fixed_hyperplane", eps, n, lh[None] <= thr, v & admissible, note)
    return GeometryResult(cfg.name, spec, eps, reports, int(degenerate.sum()), warning,
                          _failures(records), records)


# ---------------------------------------------------------------- growth bounds


@dataclass
class GrowthResult:
    scenario: str
    lambda1_hat: float
    epsilons: np.ndarray
    reports: dict
    failed: dict
    records: list = field(repr=False, default_factory=list)


def run_growth_bounds(cfg: ScenarioConfig, workers: int = 1,
                      probe_sequence: Callable[[int], np.ndarray] | None = None,
                      records: list | None = None) -> GrowthResult:
    """Complement frequencies of the two-sided growth events

      vector:  delta([v],[L_mu]) e^{n(l1-eps)} <= ||L_n v||/||v|| <= e^{n(l1+eps)}
      norm:    e^{n(l1-eps)} <= ||L_n|| <= e^{n(l1+eps)}

    and, with ``probe_sequence``, of the vector event along v_n -> v.
    """
    lmu = cfg.l_mu if cfg.l_mu is not None else SubspaceSpec(np.zeros((0, cfg.dim)), cfg.dim)
    dv = None
    if cfg.probe_vector is not None:
        dv = float(dist_to_subspace_batch(cfg.probe_vector, lmu))
        if dv < 1e-12:
            raise DomainError(
                "probe vector lies in L_mu: the lower growth bound degenerates to 0 "
                "and the vector event carries no information")
    sequence = None
    if probe_sequence is not None:
        sequence = {int(n): np.asarray(probe_sequence(int(n)), dtype=complex) for n in cfg.checkpoints()}
    if records is None:
        records = simulate(cfg, workers=workers, sequence=sequence)
    ok = _ok(records)
    if not ok:
        raise DomainError("every trial failed")
    lam, _ = pooled_lambda1(ok)
    eps = np.asarray(cfg.epsilons if cfg.epsilons else (0.1,), dtype=float)
    n = ok[0].n
    lo = n[None, None, :] * (lam - eps[:, None, None])
    hi = n[None, None, :] * (lam + eps[:, None, None])
    valid = np.ones((eps.size, len(ok), n.size), bool)
    reports = {}
    ln = _stack(ok, "log_norm")[None]
    reports["norm"] = _tail("norm", eps, n, (ln < lo) | (ln > hi), valid)
    if dv is not None:
        g = _stack(ok, "vector_log_growth")[None]
        reports["vector"] = _tail("vector", eps, n, (g < math.log(dv) + lo) | (g > hi), valid)
    if sequence is not None:
        seq_d = np.array([float(dist_to_subspace_batch(sequence[int(k)], lmu)) for k in n])
        g = _stack(ok, "sequence_log_growth")[None]
        with np.errstate(divide="ignore"):
            lower = np.log(seq_d)[None, None, :] + lo
        reports["sequence"] = _tail("sequence", eps, n, (g < lower) | (g > hi), valid & np.isfinite(g))
    return GrowthResult(cfg.name, lam, eps, reports, _failures(records), records)


# ---------------------------------------------------------------- Markov counterexample


@dataclass
class CounterexampleReport:
    n_max: int
    seed: int
    first_state: str
    windowed_min: float
    windowed_max: float
    lambda1_hat: float
    lambda1_stderr: float
    rho_one_fraction: float
    coset_occupancy: dict
    return_times: np.ndarray
    gaps_ok: bool
    tau_bound_ok: bool
    return_products_ok: bool | None
    exactness_violations: int
    norm_window_fluctuation: float
    checks: dict
    record: TrajectoryRecord = field(repr=False, default=None)

    @property
    def summary(self) -> dict:
        return {
            "windowed_min": self.windowed_min,
            "windowed_max": self.windowed_max,
            "lambda1_hat": self.lambda1_hat,
            "lambda1_stderr": self.lambda1_stderr,
            "rho_one_fraction": self.rho_one_fraction,
            "first_state": self.first_state,
            "coset_occupancy": self.coset_occupancy,
            "n_returns": int(self.return_times.size),
            "gaps_in_1_3": self.gaps_ok,
            "tau_bound": self.tau_bound_ok,
            "return_products_are_powers": self.return_products_ok,
            "exactness_violations": self.exactness_violations,
            "norm_window_fluctuation": self.norm_window_fluctuation,
            "checks": self.checks,
        }


def run_counterexample(n_max: int = 30000, seed: int = 0) -> CounterexampleReport:
    """Single long trajectory of the Markov-driven monomial walk on {a, sigma, omega}."""
    from .scenarios import counterexample_law

    law = counterexample_law()
    cfg = ScenarioConfig("paper-counterexample", law, n_max=n_max, trials=1, master_seed=seed,
                         checkpoint_stride=1, checkpoint_growth=1.0)
    rec = simulate(cfg)[0]
    if rec.error:
        raise DomainError(rec.error)
    n = rec.n
    rho_rate = rec.log_rho / n
    norm_rate = rec.log_norm / n
    window = n >= n_max / 2
    lam, se = pooled_lambda1([rec])

    shift = np.array([0, 1, 2])  # a, sigma, omega act on the index cyclically
    disp = np.cumsum(shift[rec.indices]) % 3
    rho_one = np.abs(rec.log_rho) <= RHO_ONE_TOL
    exact_viol = int(np.sum((disp != 0) & ~rho_one))

    codes = {MonomialProduct(np.asarray(MonomialSupport.from_law(law).perm[j]), np.zeros(3), np.zeros(3)).perm_code(): name
             for j, name in ((0, "H"), (1, "sigma H"), (2, "omega H"))}
    labels = rec.coset_label
    occupancy = {name: float(np.mean(labels == code)) for code, name in codes.items()}

    rt = return_times(rec.indices, 0)
    gaps = np.diff(rt)
    gaps_ok = bool(np.all(np.isin(gaps, (1, 3))))
    k = np.arange(1, rt.size + 1)
    tau_ok = bool(np.all(rt <= 3 * k + 1))
    products_ok = None
    if rec.indices[0] == 0:
        # L at the k-th return equals a^k: identity coset, log-moduli (k, 0, -k) log 3
        pos = rt - 1
        expect = np.outer(k, [1.0, 0.0, -1.0]) * math.log(3.0)
        same_coset = labels[pos] == next(c for c, nm in codes.items() if nm == "H")
        products_ok = bool(np.all(same_coset) and np.allclose(rec.log_sv[pos], expect, rtol=0, atol=1e-9 * n_max))

    wmin = float(rho_rate[window].min())
    wmax = float(rho_rate[window].max())
    fluct = float(norm_rate[window].max() - norm_rate[window].min())
    frac = float(np.mean(rho_one))
    checks = {
        "windowed_min_le_0.01": wmin <= 0.01,
        "windowed_max_ge_log3_over_3": wmax >= math.log(3.0) / 3.0,
        "windowed_max_near_lambda1": abs(wmax - lam) <= 0.03,
        "lambda1_near_log3_over_2": abs(lam - math.log(3.0) / 2.0) <= 0.02,
        "rho_one_fraction_in_0.45_0.55": 0.45 <= frac <= 0.55,
        "return_gaps_and_tau_bound": gaps_ok and tau_ok,
        "norm_window_fluctuation_lt_0.02": fluct < 0.02,
        "rho_one_off_identity_coset": exact_viol == 0,
    }
    return CounterexampleReport(
        n_max=n_max, seed=seed, first_state=law.labels[int(rec.indices[0])],
        windowed_min=wmin, windowed_max=wmax, lambda1_hat=lam, lambda1_stderr=se,
        rho_one_fraction=frac, coset_occupancy=occupancy, return_times=rt,
        gaps_ok=gaps_ok, tau_bound_ok=tau_ok, return_products_ok=products_ok,
        exactness_violations=exact_viol, norm_window_fluctuation=fluct,
        checks=checks, record=rec,
    )


# ---------------------------------------------------------------- inequality fuzzing


FUZZ_CHECKS = ("gap_lemma", "bflm", "contraction", "radius_sandwich", "radius_exterior", "radius_size")


@dataclass
class FuzzReport:
    evaluated: dict
    violations: dict
    applicable: int
    examples: list

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))


def complex_gaussian_matrices(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    """Standard complex Gaussian matrices, redrawn until |det| >= 1e-300."""
    g = (rng.standard_normal((count, d, d)) + 1j * rng.standard_normal((count, d, d))) / math.sqrt(2.0)
    bad = np.abs(np.linalg.det(g)) < 1e-300
    while np.any(bad):
        k = int(bad.sum())
        g[bad] = (rng.standard_normal((k, d, d)) + 1j * rng.standard_normal((k, d, d))) / math.sqrt(2.0)
        bad = np.abs(np.linalg.det(g)) < 1e-300
    return g


def exact_corpus(max_len: int = 6) -> np.ndarray:
    """All words of length 1..max_len in the matrices a, sigma, omega."""
    from itertools import product
    from .scenarios import counterexample_law

    gens = counterexample_law().support
    out = []
    for length in range(1, max_len + 1):
        for word in product(range(3), repeat=length):
            g = np.eye(3, dtype=complex)
            for j in word:
                g = gens[j] @ g
            out.append(g)
    return np.stack(out)


def _fuzz_batch(g: np.ndarray, rng: np.random.Generator, report: FuzzReport, max_examples: int):
    d = g.shape[-1]
    B = g.shape[0]
    u = rng.standard_normal((B, d)) + 1j * rng.standard_normal((B, d))
    v = rng.standard_normal((B, d)) + 1j * rng.standard_normal((B, d))
    results = {}
    app, holds, _, _ = gap_lemma_batch(g)
    report.applicable += int(app.sum())
    results["gap_lemma"] = holds
    results["bflm"] = bflm_batch(g, u)[0]
    results["contraction"] = contraction_batch(g, v)[0]
    sw = np.ones(B, bool)
    ex = np.ones(B, bool)
    sz = np.ones(B, bool)
    for s in range(1, d + 1):
        a, b, c = radius_bounds_batch(g, s)
        sw &= a
        ex &= b
        sz &= c
    results["radius_sandwich"] = sw
    results["radius_exterior"] = ex
    results["radius_size"] = sz
    for name, ok in results.items():
        report.evaluated[name] += B
        bad = np.flatnonzero(~ok)
        report.violations[name] += int(bad.size)
        for j in bad[: max(0, max_examples - len(report.examples))]:
            report.examples.append({"check": name, "g": g[j], "u": u[j], "v": v[j]})


def run_lemma_fuzz(count: int, dims=(2, 3, 5), seed: int = 0, include_corpus: bool = True,
                   chunk: int = 5000, max_examples: int = 10) -> FuzzReport:
    """Evaluate every pointwise inequality on ``count`` complex Gaussian
    matrices per dimension (plus the words of length <= 6 in a, sigma, omega);
    violating inputs are kept for reproduction."""
    report = FuzzReport({c: 0 for c in FUZZ_CHECKS}, {c: 0 for c in FUZZ_CHECKS}, 0, [])
    if count <= 0 and not include_corpus:
        return report
    for d in dims:
        rng = trial_rng(seed, d)
        done = 0
        while done < count:
            b = min(chunk, count - done)
            _fuzz_batch(complex_gaussian_matrices(rng, b, d), rng, report, max_examples)
            done += b
    if include_corpus:
        _fuzz_batch(exact_corpus(), trial_rng(seed, 10_000), report, max_examples)
    return report
