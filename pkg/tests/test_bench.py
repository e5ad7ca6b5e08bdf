import numpy as np
import pytest

from hoinfo import EstimatorConfig, InputError, covariance, gaussian_oinfo
from hoinfo.bench import (
    AR1,
    BenchReport,
    BlockCorr,
    White,
    block_covariance,
    parse_structure,
    run_benchmark,
    synth_dataset,
)


def test_white_is_reproducible():
    a = synth_dataset(4, 50, 3)
    assert np.array_equal(a.values, synth_dataset(4, 50, 3).values)
    assert not np.array_equal(a.values, synth_dataset(4, 50, 4).values)


def test_ar1_zero_is_white():
    assert np.array_equal(synth_dataset(3, 40, 1, AR1(0.0)).values, synth_dataset(3, 40, 1).values)


def test_ar1_autocorrelation():
    x = synth_dataset(2, 50_000, 2, AR1(0.7)).values
    r = [np.corrcoef(row[:-1], row[1:])[0, 1] for row in x]
    np.testing.assert_allclose(r, 0.7, atol=0.02)
    np.testing.assert_allclose(x.var(axis=1), 1.0, atol=0.05)


def test_blockcorr_triad_oinfo():
    x = synth_dataset(6, 100_000, 5, BlockCorr(0.5, 3))
    for t in [(0, 1, 2), (3, 4, 5)]:
        assert gaussian_oinfo(covariance(x, t)) == pytest.approx(0.084950, abs=0.01)
    assert abs(gaussian_oinfo(covariance(x, (0, 1, 3)))) < 0.01


def test_block_covariance_layout():
    cov = block_covariance(7, 0.3, 3, n_blocks=1)
    assert cov[0, 2] == 0.3 and cov[3, 4] == 0.0 and np.all(np.diag(cov) == 1)
    with pytest.raises(InputError):
        block_covariance(5, 0.3, 3, n_blocks=2)


def test_invalid_parameters():
    with pytest.raises(InputError):
        synth_dataset(3, 10, 0, AR1(1.0))
    with pytest.raises(InputError):
        synth_dataset(3, 10, 0, BlockCorr(-0.9, 3))
    with pytest.raises(InputError):
        synth_dataset(1, 10, 0)


def test_parse_structure():
    assert parse_structure("white") == White()
    assert parse_structure("ar1:0.3") == AR1(0.3)
    assert parse_structure("blockcorr:0.5:3") == BlockCorr(0.5, 3)
    assert parse_structure("blockcorr:0.5:3:2") == BlockCorr(0.5, 3, 2)
    for bad in ("pink", "ar1", "blockcorr:x:3"):
        with pytest.raises(InputError):
            parse_structure(bad)


def test_single_estimator_ratio():
    rep = run_benchmark(8, 30, 3, ["gaussian"], EstimatorConfig())
    assert rep.ratios == {"gaussian": 1.0}
    assert rep.baseline == "gaussian"
    assert rep.per_estimator[0].tuples == 56
    assert len(rep.table().splitlines()) == 2


def test_report_schema_and_roundtrip():
    rep = run_benchmark(6, 30, 3, ["gaussian", "renyi-exact"], EstimatorConfig())
    assert rep.baseline == "renyi-exact"
    assert list(rep.ratios) == ["gaussian"]
    assert {e.name for e in rep.per_estimator} == {"gaussian", "renyi-exact"}
    assert BenchReport.from_json(rep.to_json()) == rep
    again = run_benchmark(6, 30, 3, ["gaussian", "renyi-exact"], EstimatorConfig())
    assert [e.output_digest for e in again.per_estimator] == [e.output_digest for e in rep.per_estimator]
    assert again.config["input_digest"] == rep.config["input_digest"]


def test_pairwise_order_and_duplicates():
    rep = run_benchmark(5, 20, 2, ["gaussian"], EstimatorConfig())
    assert rep.per_estimator[0].tuples == 10
    with pytest.raises(InputError):
        run_benchmark(5, 20, 3, ["gaussian", "gaussian"], EstimatorConfig())
    with pytest.raises(InputError):
        run_benchmark(5, 20, 3, [], EstimatorConfig())
