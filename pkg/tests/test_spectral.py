import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import eigh_tridiagonal, qr

from perfhom.errors import ArgumentError
from perfhom.spectral import (eigenbasis, exact_interval_eigenvalue, family_chi, family_eps0, family_eps0_exact,
                              family_vector, null_vector, poincare_adversary, projection_bound_check,
                              rigidity_probe, sturm_count, worst_projection_margin)


@pytest.fixture(scope="module")
def interval():
    return eigenbasis("interval", 199)


@pytest.fixture(scope="module")
def small():
    return eigenbasis("interval", 40)


def _orthonormal_set(basis, m, rng):
    """m random vectors orthonormal in the lumped inner product."""
    Q, _ = qr(rng.standard_normal((basis.dof, m)), mode="economic")
    return Q.T / math.sqrt(basis.w)


def test_eigenvalues_match_formula(interval):
    m = np.arange(1, 21)
    np.testing.assert_allclose(interval.lam[:20], exact_interval_eigenvalue(199, m), rtol=1e-12)


def test_eigenvalues_against_dense_solver():
    N = 30
    h = 1.0 / (N + 1)
    b = eigenbasis("interval", N)
    ref = eigh_tridiagonal(np.full(N, 2 / h ** 2), np.full(N - 1, -1 / h ** 2), eigvals_only=True)
    np.testing.assert_allclose(b.lam, ref, rtol=1e-12)


def test_eigenvalue_convergence_second_order():
    m = np.arange(1, 11)
    errs = [np.abs(exact_interval_eigenvalue(N, m) / (m * math.pi) ** 2 - 1) for N in (49, 99, 199)]
    for a, b in zip(errs, errs[1:]):
        assert np.all(a / b > 3.5)


def test_sturm_count_counts_eigenvalues(small):
    h = small.h
    d, o = np.full(40, 2 / h ** 2), np.full(39, -1 / h ** 2)
    mids = 0.5 * (small.lam[:-1] + small.lam[1:])
    np.testing.assert_array_equal(sturm_count(d, o, mids), np.arange(1, 40))


@pytest.mark.parametrize("domain,N", [("interval", 199), ("square", 12)])
def test_gram_and_rayleigh(domain, N):
    b = eigenbasis(domain, N, 60)
    assert np.max(np.abs(b.gram() - np.eye(60))) <= 1e-10
    ray = np.array([b.grad2(e) / b.norm2(e) for e in b.vecs])
    np.testing.assert_allclose(ray, b.lam, rtol=1e-8)
    assert np.all(np.diff(b.lam) >= 0)


def test_square_ground_state(interval):
    sq = eigenbasis("square", 15, 10)
    one = eigenbasis("interval", 15, 2)
    assert sq.lam[0] == pytest.approx(2 * one.lam[0], rel=1e-14)
    e1 = np.outer(one.vecs[0], one.vecs[0]).ravel()
    assert abs(abs(sq.inner(sq.vecs[0], e1)) - 1) <= 1e-12
    # ties broken lexicographically on (m_x, m_y)
    assert sq.labels[1:3] == ((1, 2), (2, 1))


def test_basis_size_checks():
    with pytest.raises(ArgumentError):
        eigenbasis("interval", 10, 11)
    with pytest.raises(ArgumentError):
        eigenbasis("disk", 10)


@given(st.integers(0, 2 ** 32 - 1))
def test_parseval(seed):
    b = eigenbasis("interval", 40)
    f = np.random.default_rng(seed).standard_normal(40)
    c = b.coefficients(f)
    assert b.norm2(f) == pytest.approx(float(np.sum(c * c)), abs=1e-10 * max(1.0, b.norm2(f)))


def test_projection_bound_equality_cases(interval):
    for m in (1, 3, 7):
        assert abs(projection_bound_check(interval, interval.vecs[m], m)) <= 1e-10
        marg = projection_bound_check(interval, interval.vecs[0], m)
        assert marg == pytest.approx(interval.lam[0] / interval.lam[m], rel=1e-10)


def test_projection_bound_random(interval):
    rng = np.random.default_rng(0)
    for k in range(500):
        f = rng.standard_normal(interval.dof) * np.exp(-0.01 * np.arange(interval.dof))
        m = int(rng.integers(0, 20))
        assert projection_bound_check(interval, f, m) >= -1e-10


def test_null_vector_solves_system():
    rng = np.random.default_rng(2)
    for m in range(1, 8):
        A = rng.standard_normal((m, m + 1))
        x, rank = null_vector(A)
        assert rank == m and np.max(np.abs(A @ x)) <= 1e-12 * np.max(np.abs(x))
    with pytest.raises(ArgumentError):
        null_vector(np.eye(2))


def test_adversary_examples(small):
    r = poincare_adversary(small.vecs[1:2], small)
    assert abs(abs(r.c[0]) - 1) <= 1e-12 and abs(r.c[1]) <= 1e-12
    assert r.rho == pytest.approx(small.lam[1] / small.lam[0], rel=1e-10)
    r = poincare_adversary(small.vecs[:4], small)
    assert r.rho == pytest.approx(1.0, abs=1e-12)
    assert abs(abs(r.c[4]) - 1) <= 1e-12


def test_adversary_random_orthonormal(small):
    rng = np.random.default_rng(4)
    for k in range(100):
        m = 1 + k % 5
        r = poincare_adversary(_orthonormal_set(small, m, rng), small)
        assert r.rho >= 1 - 1e-9 and not r.degenerate


def test_probe_signed_eigenbasis(small):
    signs = np.where(np.arange(small.M) % 3 == 1, -1.0, 1.0)
    rep = rigidity_probe(signs[:, None] * small.vecs, small, 6)
    assert rep.passed and rep.witness is None
    assert rep.pattern_max <= 1e-10


def test_probe_finds_violation(small):
    b = small.vecs[[2, 0, 1, 3, 4]]
    rep = rigidity_probe(b, small, 3)
    assert not rep.passed
    m, f = rep.witness
    assert m == 1
    assert abs(small.inner(f, b[0])) <= 1e-10 * math.sqrt(small.norm2(f))
    assert small.grad2(f) / small.norm2(f) < small.lam[1]


def test_probe_needs_orthonormal(small):
    with pytest.raises(ArgumentError):
        rigidity_probe(2 * small.vecs[:3], small, 2)


def test_worst_margin_for_eigenvectors(small):
    for m in (1, 2, 5):
        marg, _ = worst_projection_margin(small, small.vecs, m)
        assert abs(marg) <= 1e-9


def test_family_threshold_closed_form(small):
    res = family_eps0(small, family_chi(small))
    exact = family_eps0_exact(*small.lam[:3])
    assert res.eps0 > 0 and res.eps0 == pytest.approx(exact, abs=1e-8)
    assert res.margin_lo >= -1e-10 and res.margin_hi < 0
    # below the threshold b_1 keeps (e_2, b_1) = 0
    assert res.e2_overlap <= 1e-12


def test_family_random_chi(small):
    chi = family_chi(small, seed=9)
    res = family_eps0(small, chi)
    assert 0 < res.eps0 < 1
    below = family_vector(small, chi, 0.5 * res.eps0)
    assert rigidity_probe(np.atleast_2d(below), small, 1).passed
    above = family_vector(small, chi, min(1.0, 1.5 * res.eps0))
    assert not rigidity_probe(np.atleast_2d(above), small, 1).passed
