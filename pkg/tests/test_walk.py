import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from lyaplab.linalg import DomainError, spectral_radius
from lyaplab.scenarios import counterexample_law
from lyaplab.walk import (
    IncrementLaw,
    MonomialProduct,
    MonomialSupport,
    QrState,
    ReturnClock,
    ScaledMatrix,
    ScaledVector,
    extend_left,
    extend_right,
    graded_matrix,
    is_aperiodic,
    monomial_left,
    monomial_right,
    qr_step,
    record_return,
    return_times,
    sample_indices,
    sample_step,
    stationary_distribution,
    trial_rng,
)

from .conftest import invertible_matrices


def iid(support, weights=None):
    m = len(support)
    return IncrementLaw("iid_finite", tuple(support), weights=np.full(m, 1 / m) if weights is None else weights)


# ---------------------------------------------------------------- laws and sampling


def test_law_validation():
    with pytest.raises(DomainError, match="weights"):
        iid([np.eye(2), np.eye(2)], [0.5, 0.6])
    with pytest.raises(DomainError, match="kernel"):
        IncrementLaw("markov_finite", (np.eye(2),), kernel=[[0.9]], initial=[1.0])
    with pytest.raises(DomainError):
        iid([np.zeros((2, 2))])
    with pytest.raises(DomainError):
        iid([np.eye(2), np.eye(3)])


def test_iid_degenerate_weights_always_index_zero():
    law = iid([np.eye(2), 2 * np.eye(2)], [1.0, 0.0])
    rng = trial_rng(1, 0)
    assert all(sample_step(law, rng)[1] == 0 for _ in range(200))


def test_markov_forced_transition():
    law = counterexample_law()
    rng = trial_rng(3, 0)
    for _ in range(100):
        assert sample_step(law, rng, prev=1)[1] == 2  # sigma -> omega
        assert sample_step(law, rng, prev=2)[1] == 0  # omega -> a


def test_counterexample_occupation_matches_stationary_law():
    idx = sample_indices(counterexample_law(), trial_rng(11, 0), 100_000)
    occ = np.bincount(idx, minlength=3) / idx.size
    assert np.allclose(occ, [0.5, 0.25, 0.25], atol=0.01)


def test_markov_transitions_chi_squared():
    law = counterexample_law()
    idx = sample_indices(law, trial_rng(5, 0), 100_000)
    prev, nxt = idx[:-1], idx[1:]
    from_a = nxt[prev == 0]
    counts = np.bincount(from_a, minlength=3)[:2]
    assert chisquare(counts, from_a.size * law.kernel[0, :2]).pvalue > 1e-3
    assert np.all(nxt[prev == 1] == 2) and np.all(nxt[prev == 2] == 0)


def test_sample_indices_agrees_with_sample_step():
    for law in (counterexample_law(), iid([np.eye(2), 2 * np.eye(2), 3 * np.eye(2)], [0.2, 0.3, 0.5])):
        fast = sample_indices(law, trial_rng(9, 4), 500)
        rng = trial_rng(9, 4)
        prev, slow = None, []
        for _ in range(500):
            _, prev = sample_step(law, rng, prev)
            slow.append(prev)
        assert np.array_equal(fast, slow)


def test_determinism_and_stream_independence():
    law = iid([np.eye(2), 2 * np.eye(2)])
    a = sample_indices(law, trial_rng(42, 0), 1000)
    assert np.array_equal(a, sample_indices(law, trial_rng(42, 0), 1000))
    assert not np.array_equal(a, sample_indices(law, trial_rng(42, 1), 1000))


def test_stationary_distribution():
    assert np.allclose(stationary_distribution(counterexample_law()), [0.5, 0.25, 0.25], atol=1e-14)
    one = IncrementLaw("markov_finite", (np.eye(2),), kernel=[[1.0]], initial=[1.0])
    assert np.allclose(stationary_distribution(one), [1.0])
    two = IncrementLaw("markov_finite", (np.eye(2), 2 * np.eye(2)), kernel=[[0.5, 0.5], [0.5, 0.5]],
                       initial=[1.0, 0.0])
    pi = stationary_distribution(two)
    assert np.allclose(pi, [0.5, 0.5])
    assert np.max(np.abs(pi @ two.kernel - pi)) <= 1e-12


def test_stationary_distribution_rejects_reducible_kernel():
    law = IncrementLaw("markov_finite", (np.eye(2), 2 * np.eye(2)), kernel=[[1.0, 0.0], [0.5, 0.5]],
                       initial=[0.5, 0.5])
    with pytest.raises(DomainError, match="reducible"):
        stationary_distribution(law)


def test_aperiodicity():
    assert is_aperiodic(counterexample_law().kernel)
    assert not is_aperiodic(np.array([[0.0, 1.0], [1.0, 0.0]]))


# ---------------------------------------------------------------- scaled products


def test_extend_left_normalization():
    x = np.diag([2.0, 1.0]).astype(complex)
    acc = extend_left(ScaledMatrix.identity(2), x)
    assert np.allclose(acc.mat, x / 2) and acc.log_scale == pytest.approx(math.log(2))


@given(st.lists(invertible_matrices(dims=(3,)), min_size=1, max_size=30))
def test_scaled_products_match_direct_products(xs):
    left, right = ScaledMatrix.identity(3), ScaledMatrix.identity(3)
    direct_l, direct_r = np.eye(3, dtype=complex), np.eye(3, dtype=complex)
    for x in xs:
        left, right = extend_left(left, x), extend_right(right, x)
        direct_l, direct_r = x @ direct_l, direct_r @ x
        assert np.linalg.norm(left.mat, 2) == pytest.approx(1.0, abs=1e-12)
    for acc, direct in ((left, direct_l), (right, direct_r)):
        assert np.linalg.norm(acc.value() - direct) <= 1e-10 * np.linalg.norm(direct)


def test_spectral_radius_homogeneity(rng):
    xs = [rng.standard_normal((3, 3)) for _ in range(5)]
    acc, direct = ScaledMatrix.identity(3), np.eye(3)
    for x in xs:
        acc, direct = extend_left(acc, x), x @ direct
    assert math.exp(acc.log_scale) * spectral_radius(acc.mat) == pytest.approx(spectral_radius(direct), rel=1e-10)


def test_log_scale_overflow_guard():
    acc = ScaledMatrix(np.eye(2, dtype=complex), np.array(1e15))
    with pytest.raises(OverflowError):
        extend_left(acc, 10 * np.eye(2))


def test_scaled_vector_tracks_growth(rng):
    x = rng.standard_normal((5, 3, 3))
    v = np.array([1.0, 2.0, 3.0])
    sv = ScaledVector.start(v)
    w = v.astype(complex)
    for g in x:
        sv, w = sv.push(g), g @ w
    assert math.exp(sv.log_scale) * np.linalg.norm(v) == pytest.approx(np.linalg.norm(w), rel=1e-12)


# ---------------------------------------------------------------- QR accumulation


def test_qr_diagonal_and_rotation():
    st_ = QrState.start(2)
    for _ in range(7):
        st_ = qr_step(st_, np.diag([2.0, 0.5]))
    assert np.allclose(st_.log_r_sums / 7, [math.log(2), -math.log(2)])
    c, s = math.cos(0.3), math.sin(0.3)
    st_ = QrState.start(2)
    for _ in range(50):
        st_ = qr_step(st_, np.array([[c, -s], [s, c]]))
    assert np.allclose(st_.log_r_sums, 0.0, atol=1e-12)


def test_qr_invariants_sl2(rng):
    mats = np.array([[[2, 1], [1, 1]], [[1, 1], [1, 2]]], dtype=complex)
    st_ = QrState.start(2, track_tri=True)
    acc = ScaledMatrix.identity(2)
    for i in rng.integers(0, 2, 40):
        st_, acc = qr_step(st_, mats[i]), extend_left(acc, mats[i])
    assert np.allclose(st_.q.conj().T @ st_.q, np.eye(2), atol=1e-9)
    assert abs(st_.log_r_sums.sum()) <= 1e-9
    assert np.allclose(graded_matrix(st_), acc.value(), rtol=1e-9)


def test_qr_rank_collapse():
    with pytest.raises(DomainError):
        qr_step(QrState.start(2), np.zeros((2, 2)))


def test_qr_sums_match_singular_values(rng):
    from lyaplab.linalg import compound

    xs = rng.standard_normal((2000, 3, 3))
    st_, acc, acc2 = QrState.start(3), ScaledMatrix.identity(3), ScaledMatrix.identity(3)
    log_det = 0.0
    for x in xs:
        st_, acc = qr_step(st_, x), extend_left(acc, x)
        acc2 = extend_left(acc2, compound(x, 2))
        log_det += math.log(abs(np.linalg.det(x)))
    # a_2 and a_3 are far below the resolution of the normalized product;
    # read them from the second exterior power and the determinant instead
    log_a1 = acc.log_scale
    log_a12 = acc2.log_scale
    sv = np.array([log_a1, log_a12 - log_a1, log_det - log_a12])
    assert np.allclose(np.sort(st_.log_r_sums)[::-1] / 2000, sv / 2000, atol=0.01)


# ---------------------------------------------------------------- return times


def test_record_return():
    c = ReturnClock(0)
    for step, i in enumerate([0, 0, 1, 2, 0], start=1):
        c = record_return(c, step, i)
    assert c.return_times == (1, 2, 5)
    c = ReturnClock(0)
    for step, i in enumerate([1, 2, 1, 2], start=1):
        c = record_return(c, step, i)
    assert c.return_times == ()
    assert np.array_equal(return_times(np.array([0, 0, 1, 2, 0]), 0), [1, 2, 5])


def test_product_at_return_times_is_power_of_a():
    law = counterexample_law()
    sup = np.stack(law.support)
    idx = sample_indices(law, trial_rng(2, 0), 200)
    idx[0] = 0  # condition on X_1 = a (a is always followed by a or sigma)
    # the kernel constraint is preserved: a -> anything allowed
    acc = np.eye(3, dtype=complex)
    k = 0
    for t, i in enumerate(idx, start=1):
        acc = sup[i] @ acc
        if i == 0:
            k += 1
            assert np.allclose(acc, np.diag([3.0 ** k, 1.0, 3.0 ** -k]), rtol=1e-12)
        if k > 20:
            break


# ---------------------------------------------------------------- monomial products


def test_monomial_products_match_dense(rng):
    perms = [np.eye(4)[list(p)] for p in ([1, 2, 3, 0], [0, 2, 1, 3], [3, 2, 1, 0])]
    sup = [p @ np.diag(np.exp(rng.standard_normal(4) + 1j * rng.standard_normal(4))) for p in perms]
    law = iid(sup)
    ms = MonomialSupport.from_law(law)
    idx = rng.integers(0, 3, 25)
    left, right = MonomialProduct.identity(4), MonomialProduct.identity(4)
    dl, dr = np.eye(4, dtype=complex), np.eye(4, dtype=complex)
    for i in idx:
        left, right = monomial_left(left, ms, i), monomial_right(right, ms, i)
        dl, dr = sup[i] @ dl, dr @ sup[i]
    assert np.allclose(left.dense(), dl, rtol=1e-10)
    assert np.allclose(right.dense(), dr, rtol=1e-10)
    ev = np.sort(np.log(np.abs(np.linalg.eigvals(dl))))[::-1]
    assert np.allclose(left.log_eigen_moduli(), ev, atol=1e-9)
    sv = np.log(np.linalg.svd(dl, compute_uv=False))
    assert np.allclose(left.log_singular_values(), sv, atol=1e-9)


def test_monomial_detection():
    assert counterexample_law().is_monomial
    assert not iid([[[2, 1], [1, 1]]]).is_monomial
    with pytest.raises(DomainError):
        MonomialSupport.from_law(iid([[[2, 1], [1, 1]]]))
