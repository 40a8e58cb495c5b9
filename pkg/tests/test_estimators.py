import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lyaplab.estimators import (
    SubspaceSpec,
    batch_means_stderr,
    check_invariance,
    dist_to_subspace,
    estimate_lambda1,
    estimate_spectrum,
    gap_index_of,
)
from lyaplab.linalg import DomainError
from lyaplab.walk import IncrementLaw, QrState, ScaledMatrix, extend_left, qr_step, sample_indices, trial_rng

from .conftest import vectors


def _run(law, n, seed=0):
    idx = sample_indices(law, trial_rng(seed, 0), n)
    acc, qr = ScaledMatrix.identity(law.dim), QrState.start(law.dim)
    norm_path = np.zeros(n + 1)
    qr_path = np.zeros((n + 1, law.dim))
    for t, i in enumerate(idx, start=1):
        acc, qr = extend_left(acc, law.support[i]), qr_step(qr, law.support[i])
        norm_path[t], qr_path[t] = acc.log_scale, qr.log_r_sums
    return norm_path, qr, qr_path, idx


def iid(support, weights=None):
    m = len(support)
    return IncrementLaw("iid_finite", tuple(support), weights=np.full(m, 1 / m) if weights is None else weights)


def test_gelfand_lambda1_is_zero():
    path, _, _, _ = _run(iid([[[0, 2], [0.5, 0]]]), 10_000)
    lam, se = estimate_lambda1(path)
    assert abs(lam) <= 1e-3 and se >= 0


def test_unitary_lambda1_is_exactly_zero():
    c, s = math.cos(1.0), math.sin(1.0)
    path, _, _, _ = _run(iid([[[c, -s], [s, c]], np.diag([1j, -1])]), 2000)
    lam, _ = estimate_lambda1(path)
    assert abs(lam) <= 1e-12


def test_diagonal_law_reduces_to_scalar_walk():
    law = iid([np.diag([2.0, 0.5]), np.diag([0.5, 2.0])])
    n = 10_000
    path, _, _, idx = _run(law, n, seed=4)
    # oracle: the log of the first coordinate is a simple +-log 2 walk
    s = np.cumsum(np.where(idx == 0, math.log(2), -math.log(2)))
    lam, _ = estimate_lambda1(path)
    assert lam == pytest.approx(abs(s[-1]) / n, abs=1e-12)
    assert lam < 0.05


def test_estimate_lambda1_rejects_empty():
    with pytest.raises(DomainError):
        estimate_lambda1(np.zeros(1))


def test_spectrum_deterministic_diagonal():
    _, qr, path, _ = _run(iid([np.diag([2.0, 1.0, 0.5])]), 100)
    est = estimate_spectrum(qr, path)
    assert np.allclose(est.lam, [math.log(2), 0, -math.log(2)])
    assert est.gap_index == 1 and est.n_used == 100


def test_spectrum_rotation_has_no_gap():
    c, s = math.cos(0.4), math.sin(0.4)
    _, qr, path, _ = _run(iid([[[c, -s], [s, c]]]), 500)
    est = estimate_spectrum(qr, path)
    assert np.allclose(est.lam, 0, atol=1e-12) and est.gap_index == 2


def test_trace_identity_and_ordering(rng):
    law = iid([rng.standard_normal((3, 3)) for _ in range(3)])
    n = 3000
    _, qr, path, idx = _run(law, n, seed=1)
    est = estimate_spectrum(qr, path)
    log_det = np.log(np.abs([np.linalg.det(g) for g in law.support]))
    assert np.all(np.diff(est.lam) <= 0)
    assert est.lam.sum() == pytest.approx(log_det[idx].mean(), abs=1e-9)


def test_lambda1_estimators_agree():
    law = iid([[[2, 1], [1, 1]], [[1, 1], [1, 2]]])
    path, qr, qpath, _ = _run(law, 10_000, seed=2)
    lam, se = estimate_lambda1(path)
    est = estimate_spectrum(qr, qpath)
    assert abs(est.lam[0] - lam) <= 3 * (se + est.stderr[0]) + 1e-9


@pytest.mark.parametrize("c", [0.5, 3.0])
def test_scaling_covariance(c, rng):
    law = iid([rng.standard_normal((3, 3)) for _ in range(2)])
    _, qr, path, _ = _run(law, 2000, seed=3)
    _, qr_c, path_c, _ = _run(law.scaled(c), 2000, seed=3)
    e, e_c = estimate_spectrum(qr, path), estimate_spectrum(qr_c, path_c)
    assert np.allclose(e_c.lam, e.lam + math.log(c), atol=1e-9)
    assert e_c.gap_index == e.gap_index


def test_gap_index_rules():
    assert gap_index_of(np.array([1.0, 0.5, 0.0]), np.zeros(3)) == 1
    assert gap_index_of(np.array([1.0, 1.0, 0.0]), np.zeros(3)) == 2
    assert gap_index_of(np.array([0.0, 0.0]), np.zeros(2)) == 2
    # gaps inside ten standard errors are noise
    assert gap_index_of(np.array([1.0, 0.95]), np.array([0.01, 0.01])) == 2


def test_batch_means_on_constant_increments():
    path = np.arange(301) * 0.25
    assert batch_means_stderr(path, 300) == pytest.approx(0.0, abs=1e-15)


def test_batch_means_on_iid_noise():
    rng = np.random.default_rng(0)
    path = np.concatenate([[0.0], np.cumsum(rng.standard_normal(30_000))])
    # for iid unit noise the standard error of the mean is 1/sqrt(n)
    assert batch_means_stderr(path, 30_000) == pytest.approx(1 / math.sqrt(30_000), rel=0.35)


# ---------------------------------------------------------------- subspaces


def test_dist_to_subspace_examples():
    e2 = SubspaceSpec(np.array([[0, 1]]), 2)
    assert dist_to_subspace(np.array([1, 0]), e2) == pytest.approx(1.0)
    assert dist_to_subspace(np.array([1, 1]) / math.sqrt(2), e2) == pytest.approx(1 / math.sqrt(2))
    assert dist_to_subspace(np.array([0, 3j]), e2) == 0.0
    assert dist_to_subspace(np.array([1, 2]), SubspaceSpec(np.zeros((0, 2)), 2)) == 1.0


def test_subspace_validation():
    with pytest.raises(DomainError):
        SubspaceSpec(np.array([[1, 1]]), 2)
    with pytest.raises(DomainError):
        dist_to_subspace(np.array([1, 0]), SubspaceSpec(np.eye(2), 2))
    with pytest.raises(DomainError):
        dist_to_subspace(np.zeros(2), SubspaceSpec(np.array([[0, 1]]), 2))


@given(vectors(4), st.floats(0, 6.28))
def test_dist_to_subspace_invariances(v, phase):
    rng = np.random.default_rng(0)
    basis = np.linalg.qr(rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))[0].T
    L = SubspaceSpec(basis, 4)
    u, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    L2 = SubspaceSpec(u @ basis, 4)
    ref = dist_to_subspace(v, L)
    assert abs(dist_to_subspace(np.exp(1j * phase) * v, L) - ref) <= 1e-12
    assert abs(dist_to_subspace(v, L2) - ref) <= 1e-12


def test_check_invariance():
    law = iid([[[2, 0], [1, 0.5]], [[2, 0], [-1, 0.5]]])
    assert check_invariance(SubspaceSpec(np.array([[0, 1]]), 2), law)
    assert not check_invariance(SubspaceSpec(np.array([[1, 0]]), 2), law)
    assert check_invariance(SubspaceSpec(np.zeros((0, 2)), 2), law)
