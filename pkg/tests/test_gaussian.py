import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoinfo import (
    CovarianceMatrix,
    SingularCovarianceError,
    TimeSeriesMatrix,
    covariance,
    gaussian_dtc,
    gaussian_entropy,
    gaussian_oinfo,
    gaussian_tc,
)
from hoinfo.gaussian import gaussian_conditional_entropy, gaussian_mi


def equicorr(k, rho):
    s = np.full((k, k), rho)
    np.fill_diagonal(s, 1.0)
    return CovarianceMatrix(s)


def oracle_entropy(s, subset):
    sub = s[np.ix_(subset, subset)]
    sign, logdet = np.linalg.slogdet(sub)
    assert sign > 0
    return 0.5 * (len(subset) * math.log(2 * math.pi * math.e) + logdet)


def oracle_tc_dtc(s):
    k = s.shape[0]
    full = list(range(k))
    h = oracle_entropy(s, full)
    tc = sum(oracle_entropy(s, [i]) for i in full) - h
    dtc = sum(oracle_entropy(s, [j for j in full if j != i]) for i in full) - (k - 1) * h
    return tc, dtc


def random_spd(rng, k):
    a = rng.standard_normal((k, k + 2))
    s = a @ a.T + 0.05 * np.eye(k)
    d = rng.uniform(0.2, 5, k)
    return d[:, None] * s * d[None, :]


def test_entropy_examples():
    assert gaussian_entropy(CovarianceMatrix(np.eye(1))) == pytest.approx(1.418938, abs=1e-6)
    assert gaussian_entropy(CovarianceMatrix(np.eye(2))) == pytest.approx(2.837877, abs=1e-6)
    expect = 0.5 * math.log((2 * math.pi * math.e) ** 3 * 0.5)
    assert gaussian_entropy(equicorr(3, 0.5)) == pytest.approx(expect, abs=1e-12)


def test_equicorrelated_triad():
    s = equicorr(3, 0.5)
    assert gaussian_tc(s) == pytest.approx(0.5 * math.log(2), abs=1e-12)
    assert gaussian_dtc(s) == pytest.approx(0.5 * (3 * math.log(0.75) - 2 * math.log(0.5)), abs=1e-12)
    assert gaussian_oinfo(s) == pytest.approx(0.084950, abs=1e-6)
    assert round(gaussian_tc(s), 6) == 0.346574
    assert round(gaussian_dtc(s), 6) == 0.261624


@pytest.mark.parametrize("rho", [-0.9, -0.3, 0.0, 0.5, 0.99])
def test_pair_is_mi(rho):
    s = equicorr(2, rho)
    assert gaussian_tc(s) == pytest.approx(-0.5 * math.log(1 - rho * rho), abs=1e-12)
    assert gaussian_tc(s) == pytest.approx(gaussian_mi(rho), abs=1e-12)
    assert gaussian_dtc(s) == gaussian_tc(s)
    assert gaussian_oinfo(s) == 0.0


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_diagonal_is_independent(k):
    s = CovarianceMatrix(np.diag(np.arange(1.0, k + 1)))
    assert abs(gaussian_tc(s)) < 1e-14
    assert abs(gaussian_dtc(s)) < 1e-14
    assert abs(gaussian_oinfo(s)) < 1e-14


def test_covariance_examples():
    x = TimeSeriesMatrix(np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0], [1.0, 2.0, 3.0]]))
    c = covariance(x, (0, 1), ridge=0.0)
    np.testing.assert_allclose(c.values, [[1, -1], [-1, 1]])
    with pytest.raises(SingularCovarianceError):
        gaussian_tc(covariance(x, (0, 2), ridge=0.0))
    raw = covariance(x, (0, 1, 2), ridge=0.0).values
    r = 1e-3
    np.testing.assert_allclose(covariance(x, (0, 1, 2), ridge=r).values - raw,
                               np.eye(3) * r * np.trace(raw) / 3, atol=1e-15)


def test_singular_after_ridge_names_tuple():
    x = TimeSeriesMatrix(np.zeros((3, 5)) + np.arange(5.0))
    with pytest.raises(SingularCovarianceError) as exc:
        gaussian_oinfo(covariance(x, (0, 1, 2), ridge=0.0))
    assert exc.value.tuple == (0, 1, 2)


def test_asymmetric_rejected():
    with pytest.raises(ValueError):
        CovarianceMatrix(np.array([[1.0, 0.5], [0.4, 1.0]]))


@pytest.mark.parametrize("k", [3, 4])
def test_oracle_equivalence(k):
    rng = np.random.default_rng(k)
    for _ in range(100):
        s = random_spd(rng, k)
        tc, dtc = oracle_tc_dtc(s)
        cm = CovarianceMatrix(s)
        assert gaussian_tc(cm) == pytest.approx(tc, rel=1e-10, abs=1e-12)
        assert gaussian_dtc(cm) == pytest.approx(dtc, rel=1e-10, abs=1e-12)


spd_seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=100, deadline=None)
@given(spd_seeds, st.integers(2, 4))
def test_scale_invariance(seed, k):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, k)
    d = np.diag(rng.uniform(0.01, 100, k))
    a, b = CovarianceMatrix(s), CovarianceMatrix(d @ s @ d)
    for f in (gaussian_tc, gaussian_dtc, gaussian_oinfo):
        assert f(b) == pytest.approx(f(a), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(spd_seeds, st.integers(2, 4))
def test_permutation_invariance(seed, k):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, k)
    # unit diagonal keeps the entropy scale O(1) for the tight tolerance
    d = 1 / np.sqrt(np.diag(s))
    s = d[:, None] * s * d[None, :]
    p = rng.permutation(k)
    a, b = CovarianceMatrix(s), CovarianceMatrix(s[np.ix_(p, p)])
    for f in (gaussian_tc, gaussian_dtc, gaussian_oinfo):
        assert abs(f(b) - f(a)) <= 1e-12 * max(1.0, abs(f(a)))


@settings(max_examples=100, deadline=None)
@given(spd_seeds, st.integers(1, 4))
def test_nonnegativity_and_conditioning(seed, k):
    s = CovarianceMatrix(random_spd(np.random.default_rng(seed), k))
    assert gaussian_tc(s) >= -1e-10
    assert gaussian_dtc(s) >= -1e-10
    if k >= 2:
        for i in range(k):
            h_i = gaussian_entropy(CovarianceMatrix(s.values[i:i + 1, i:i + 1]))
            assert gaussian_conditional_entropy(s, i) <= h_i + 1e-10


def test_sampled_triad_converges():
    rng = np.random.default_rng(0)
    chol = np.linalg.cholesky(equicorr(3, 0.5).values)
    x = TimeSeriesMatrix(chol @ rng.standard_normal((3, 100_000)))
    assert gaussian_oinfo(covariance(x, (0, 1, 2))) == pytest.approx(0.084950, abs=0.01)


def test_triad_inclusion_exclusion():
    # at K=3, O = sum H_i - sum H_ij + H_ijk
    rng = np.random.default_rng(9)
    s = random_spd(rng, 3)
    h1 = sum(oracle_entropy(s, [i]) for i in range(3))
    h2 = sum(oracle_entropy(s, list(p)) for p in combinations(range(3), 2))
    h3 = oracle_entropy(s, [0, 1, 2])
    assert gaussian_oinfo(CovarianceMatrix(s)) == pytest.approx(h1 - h2 + h3, abs=1e-12)
