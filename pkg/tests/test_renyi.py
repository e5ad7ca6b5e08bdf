import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grams import FAMILIES, wishart_gram
from hoinfo import (
    DegenerateBandwidthError,
    EstimatorConfig,
    GramMatrix,
    InputError,
    ProbeSet,
    TimeSeriesMatrix,
    batch_entropy,
    gram,
    joint_gram,
    pairwise_mi,
    renyi_entropy_exact,
    renyi_entropy_randomized,
    renyi_oinfo,
)
from hoinfo.renyi import (
    KernelCache,
    hutchinson_power_trace,
    kernel_matrix,
    probe_seed,
    renyi_tc_dtc,
    resolve_bandwidth,
    tuple_entropies,
)

EXACT = EstimatorConfig(estimator="renyi-exact")
RANDOM = EstimatorConfig(estimator="renyi-randomized", master_seed=7)


def white(seed, c, t):
    return TimeSeriesMatrix(np.random.default_rng(seed).standard_normal((c, t)))


def test_median_bandwidth_three_scalars():
    assert resolve_bandwidth([0.0, 1.0, 3.0]) == 2.0


def test_median_falls_back_to_smallest_nonzero():
    # six zero distances and four of 2: the median is 0
    s = [0.0, 0.0, 0.0, 0.0, 2.0]
    assert resolve_bandwidth(s) == 2.0


def test_identical_samples():
    with pytest.raises(DegenerateBandwidthError):
        gram([1.0, 1.0, 1.0])
    g = gram([1.0, 1.0, 1.0], bandwidth=0.5)
    np.testing.assert_allclose(g.values, np.full((3, 3), 1 / 3))


def test_gram_contract():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((20, 3))
    k = kernel_matrix(x)
    assert not k.normalized
    np.testing.assert_array_equal(np.diag(k.values), 1.0)
    np.testing.assert_array_equal(k.values, k.values.T)
    g = gram(x)
    assert abs(np.trace(g.values) - 1) < 1e-12
    assert np.linalg.eigvalsh(g.values).min() > -1e-12
    d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
    sigma = np.median(d[np.triu_indices(20, 1)])
    np.testing.assert_allclose(k.values, np.exp(-d ** 2 / (2 * sigma ** 2)), rtol=1e-12)


def test_gram_is_read_only():
    g = gram(np.arange(4.0), 1.0)
    with pytest.raises(ValueError):
        g.values[0, 0] = 2.0


def test_joint_gram_identities():
    rng = np.random.default_rng(1)
    k = kernel_matrix(rng.standard_normal(6))
    ones = GramMatrix(np.ones((6, 6)), normalized=False)
    np.testing.assert_allclose(joint_gram([k, ones]).values, k.normalize().values, rtol=1e-15)
    eye = GramMatrix(np.eye(6), normalized=False)
    np.testing.assert_array_equal(joint_gram([eye, eye]).values, np.eye(6) / 6)
    k2 = kernel_matrix(rng.standard_normal(6))
    prod = k.values * k2.values
    np.testing.assert_allclose(joint_gram([k, k2]).values, prod / np.trace(prod), rtol=1e-15)
    with pytest.raises(InputError):
        joint_gram([k, k.normalize()])
    with pytest.raises(InputError):
        joint_gram([k, kernel_matrix(rng.standard_normal(5))])


def test_exact_examples():
    for n in (2, 5, 17):
        for alpha in (0.5, 1.01, 2.0, 3.0):
            assert renyi_entropy_exact(GramMatrix(np.eye(n) / n), alpha) == pytest.approx(math.log(n), abs=1e-12)
            assert abs(renyi_entropy_exact(GramMatrix(np.ones((n, n)) / n), alpha)) < 1e-9
    q = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    g = GramMatrix(q @ np.diag([0.75, 0.25]) @ q.T)
    assert renyi_entropy_exact(g, 2) == pytest.approx(-math.log(0.625), abs=1e-12)
    assert round(renyi_entropy_exact(g, 2), 6) == 0.470004


def test_exact_rejects_bad_input():
    with pytest.raises(InputError):
        renyi_entropy_exact(GramMatrix(np.eye(2) / 2), 1.0)
    with pytest.raises(InputError):
        renyi_entropy_exact(GramMatrix(np.eye(2), normalized=False), 2.0)
    with pytest.raises(Exception, match="PSD"):
        renyi_entropy_exact(GramMatrix(np.array([[0.5, 0.9], [0.9, 0.5]])), 2.0)


def test_randomized_requires_integer_alpha():
    g = GramMatrix(np.eye(4) / 4)
    with pytest.raises(InputError, match="integer"):
        renyi_entropy_randomized(g, 2.5, ProbeSet(10, 0, 4))
    with pytest.raises(InputError, match="integer"):
        hutchinson_power_trace(g, 1, ProbeSet(10, 0, 4))


def test_rank_one_randomized():
    n = 32
    g = GramMatrix(np.ones((n, n)) / n)
    assert abs(renyi_entropy_randomized(g, 2, ProbeSet(30, 3, n))) < 0.5
    assert abs(renyi_entropy_randomized(g, 2, ProbeSet(20000, 3, n))) < 0.03


def test_probes_regenerate_bit_identically():
    p = ProbeSet(30, 123456789, 64)
    a, b = p.vectors(), ProbeSet(30, 123456789, 64).vectors()
    assert a.shape == (64, 30)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, ProbeSet(30, 123456790, 64).vectors())


def test_probe_seed_depends_on_sorted_tuple():
    assert probe_seed(0, (3, 1, 2), 5) == probe_seed(0, (1, 2, 3), 5)
    seeds = {probe_seed(0, (1, 2, 3), m) for m in range(1, 8)}
    assert len(seeds) == 7
    assert probe_seed(0, (1, 2, 3), 1) != probe_seed(1, (1, 2, 3), 1)
    assert 0 <= probe_seed(2**63, (0, 115), 3) < 2**64


def test_randomized_deterministic():
    g = wishart_gram(np.random.default_rng(0), 40)
    p = ProbeSet(30, 99, 40)
    assert renyi_entropy_randomized(g, 2, p) == renyi_entropy_randomized(g, 2, p)


def test_hutchinson_unbiased():
    rng = np.random.default_rng(11)
    g = wishart_gram(rng, 64)
    exact = float(np.trace(g.values @ g.values))
    est = np.array([hutchinson_power_trace(g, 2, ProbeSet(30, s, 64)) for s in range(200)])
    se = est.std(ddof=1) / math.sqrt(len(est))
    assert abs(est.mean() - exact) < 3 * se


@pytest.mark.parametrize("family", sorted(FAMILIES))
@pytest.mark.parametrize("n", [32, 64, 128])
@pytest.mark.parametrize("alpha", [2, 3])
def test_backend_agreement(family, n, alpha):
    rng = np.random.default_rng(n + alpha)
    for i in range(5):
        g = FAMILIES[family](rng, n)
        exact = renyi_entropy_exact(g, alpha)
        approx = renyi_entropy_randomized(g, alpha, ProbeSet(1000, i, n))
        assert abs(approx - exact) <= 0.02 * abs(exact)


def test_odd_and_even_power_paths():
    g = wishart_gram(np.random.default_rng(4), 16)
    p = ProbeSet(5, 1, 16)
    v = p.vectors()
    for alpha in (2, 3, 4, 5):
        direct = np.einsum("ij,ij->j", v, np.linalg.matrix_power(g.values, alpha) @ v).mean()
        assert hutchinson_power_trace(g, alpha, p) == pytest.approx(direct, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40), st.sampled_from([0.5, 1.01, 2.0, 3.0]))
def test_entropy_bounds(seed, n, alpha):
    rng = np.random.default_rng(seed)
    g = gram(rng.standard_normal((n, 2)) * rng.uniform(0.1, 10), rng.uniform(0.05, 5))
    h = renyi_entropy_exact(g, alpha)
    assert -1e-9 <= h <= math.log(n) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 40))
def test_joint_refines(seed, n):
    rng = np.random.default_rng(seed)
    a = kernel_matrix(rng.standard_normal(n))
    b = kernel_matrix(rng.standard_normal(n))
    hj = renyi_entropy_exact(joint_gram([a, b]), 2.0)
    assert hj >= max(renyi_entropy_exact(a.normalize(), 2.0), renyi_entropy_exact(b.normalize(), 2.0)) - 1e-6


def test_tuple_entropy_term_count():
    x = white(0, 4, 30)
    cache = KernelCache(x, EXACT)
    mats = [cache(i) for i in range(4)]
    assert len(tuple_entropies(mats[:2], (0, 1), EXACT)) == 3
    assert len(tuple_entropies(mats[:3], (0, 1, 2), EXACT)) == 7
    assert len(tuple_entropies(mats, (0, 1, 2, 3), EXACT)) == 9


@pytest.mark.parametrize("cfg", [EXACT, RANDOM], ids=["exact", "randomized"])
def test_pair_oinfo_is_zero(cfg):
    x = white(1, 6, 50)
    for i, j in [(0, 1), (2, 5), (4, 3)]:
        assert renyi_oinfo(x, (i, j), cfg) == 0.0


def test_independent_triad_near_zero():
    x = white(2, 3, 256)
    assert abs(renyi_oinfo(x, (0, 1, 2), EXACT)) <= 0.05


def test_pairwise_mi_properties():
    x = white(3, 3, 256)
    assert pairwise_mi(x, 0, 1, EXACT) == pairwise_mi(x, 1, 0, EXACT)
    assert pairwise_mi(x, 0, 2, EXACT) <= 0.1
    assert pairwise_mi(x, 0, 1, EXACT) >= -1e-6
    # a duplicated channel: the Hadamard joint K*K is a narrower kernel, so
    # I(X;X) = 2H(X) - H(X,X) sits between the independent-pair level and H(X)
    dup = TimeSeriesMatrix(np.vstack([x.values[0], x.values[0]]))
    cache = KernelCache(dup, EXACT)
    k = cache(0)
    h = renyi_entropy_exact(GramMatrix(k / np.trace(k)), 2.0)
    hj = renyi_entropy_exact(joint_gram([GramMatrix(k, False), GramMatrix(k, False)]), 2.0)
    mi = pairwise_mi(dup, 0, 1, EXACT)
    assert mi == pytest.approx(2 * h - hj, abs=1e-12)
    assert 5 * pairwise_mi(x, 0, 2, EXACT) < mi <= h + 1e-9
    with pytest.raises(InputError):
        pairwise_mi(x, 1, 1, EXACT)


@pytest.mark.parametrize("cfg", [EXACT, RANDOM], ids=["exact", "randomized"])
def test_oinfo_permutation_invariant(cfg):
    from itertools import permutations
    x = white(4, 5, 40)
    ref = renyi_oinfo(x, (0, 2, 4), cfg)
    assert all(renyi_oinfo(x, p, cfg) == ref for p in permutations((0, 2, 4)))
    ref4 = renyi_oinfo(x, (0, 1, 3, 4), cfg)
    assert renyi_oinfo(x, (4, 3, 1, 0), cfg) == ref4


def test_randomized_tracks_exact_on_tuples():
    x = white(5, 4, 60)
    cfg = RANDOM.replace(probes=2000)
    tc_e, dtc_e = renyi_tc_dtc(x, (0, 1, 2), EXACT)
    tc_r, dtc_r = renyi_tc_dtc(x, (0, 1, 2), cfg)
    assert tc_r == pytest.approx(tc_e, abs=0.05)
    assert dtc_r == pytest.approx(dtc_e, abs=0.05)


def test_kernel_cache_eviction_is_transparent():
    x = white(6, 5, 30)
    small = KernelCache(x, EXACT, max_bytes=30 * 30 * 8)
    big = KernelCache(x, EXACT)
    for t in [(0, 1, 2), (2, 3, 4), (0, 3, 4)]:
        assert renyi_oinfo(x, t, EXACT, small) == renyi_oinfo(x, t, EXACT, big)
    assert small.misses > big.misses


def test_batch_entropy():
    cfg = EstimatorConfig(estimator="renyi-exact")
    assert abs(batch_entropy(np.ones((8, 3)), cfg.replace(bandwidth=1.0))) < 1e-9
    far = np.eye(8) * 1e3
    assert batch_entropy(far, cfg.replace(bandwidth=1.0)) == pytest.approx(math.log(8), abs=1e-3)
    z = np.random.default_rng(8).standard_normal((8, 4))
    c5 = cfg.replace(bandwidth=5.0, ib_alpha=1.01)
    assert batch_entropy(z, c5) == renyi_entropy_exact(gram(z, 5.0), 1.01)
