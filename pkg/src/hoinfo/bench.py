"""Synthetic data and wall-clock comparison of the O-information estimators.

Speedups are ratios against the exact Renyi sweep (or against the first
estimator listed when exact Renyi is not part of the run).
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Estimator, EstimatorConfig, TimeSeriesMatrix, content_digest
from .errors import InputError
from .views import build_order_view, build_pairwise_view


@dataclass(frozen=True)
class White:
    pass


@dataclass(frozen=True)
class AR1:
    phi: float


@dataclass(frozen=True)
class BlockCorr:
    """Consecutive blocks of ``blocksize`` equicorrelated channels.

    ``n_blocks=None`` fills as many whole blocks as fit; remaining channels
    are independent white noise.
    """

    rho: float
    blocksize: int
    n_blocks: int | None = None


Structure = White | AR1 | BlockCorr


def parse_structure(text: str) -> Structure:
    """``white``, ``ar1:PHI`` or ``blockcorr:RHO:SIZE[:NBLOCKS]``."""
    parts = text.split(":")
    try:
        if parts[0] == "white" and len(parts) == 1:
            return White()
        if parts[0] == "ar1" and len(parts) == 2:
            return AR1(float(parts[1]))
        if parts[0] == "blockcorr" and len(parts) in (3, 4):
            nb = int(parts[3]) if len(parts) == 4 else None
            return BlockCorr(float(parts[1]), int(parts[2]), nb)
    except ValueError:
        pass
    raise InputError(f"cannot parse structure {text!r}")


def block_covariance(num_channels: int, rho: float, blocksize: int, n_blocks: int | None = None) -> np.ndarray:
    if blocksize < 1:
        raise InputError("blocksize must be >= 1")
    fit = num_channels // blocksize
    nb = fit if n_blocks is None else n_blocks
    if not 0 <= nb <= fit:
        raise InputError(f"{nb} blocks of size {blocksize} do not fit in {num_channels} channels")
    cov = np.eye(num_channels)
    for b in range(nb):
        s = slice(b * blocksize, (b + 1) * blocksize)
        cov[s, s] = rho
        cov[range(s.start, s.stop), range(s.start, s.stop)] = 1.0
    return cov


def synth_dataset(num_channels: int, num_timepoints: int, seed: int,
                  structure: Structure = White()) -> TimeSeriesMatrix:
    """Reproducible synthetic series (white, per-channel AR(1), or block-equicorrelated Gaussian)."""
    if num_channels < 2 or num_timepoints < 2:
        raise InputError("need C >= 2 and T >= 2")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((num_channels, num_timepoints))
    if isinstance(structure, White):
        return TimeSeriesMatrix(eps)
    if isinstance(structure, AR1):
        phi = float(structure.phi)
        if not abs(phi) < 1:
            raise InputError(f"AR(1) coefficient must satisfy |phi| < 1, got {phi}")
        scale = np.sqrt(1.0 - phi * phi)
        x = np.empty_like(eps)
        x[:, 0] = eps[:, 0]
        for t in range(1, num_timepoints):
            x[:, t] = phi * x[:, t - 1] + scale * eps[:, t]
        return TimeSeriesMatrix(x)
    if isinstance(structure, BlockCorr):
        if not abs(structure.rho) < 1:
            raise InputError(f"block correlation must satisfy |rho| < 1, got {structure.rho}")
        cov = block_covariance(num_channels, structure.rho, structure.blocksize, structure.n_blocks)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise InputError(f"rho={structure.rho} gives a non-positive-definite block covariance") from None
        return TimeSeriesMatrix(chol @ eps)
    raise InputError(f"unknown structure {structure!r}")


@dataclass
class EstimatorTiming:
    name: str
    wall_seconds: float
    tuples_per_second: float
    tuples: int
    defects: int
    output_digest: str


@dataclass
class BenchReport:
    config: dict
    per_estimator: list[EstimatorTiming] = field(default_factory=list)
    ratios: dict[str, float] = field(default_factory=dict)
    baseline: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        d = json.loads(text)
        d["per_estimator"] = [EstimatorTiming(**e) for e in d["per_estimator"]]
        return cls(**d)

    def table(self) -> str:
        lines = [f"{'estimator':<18} {'seconds':>10} {'tuples/s':>12} {'speedup':>9}"]
        for e in self.per_estimator:
            ratio = 1.0 if e.name == self.baseline else self.ratios.get(e.name, float("nan"))
            lines.append(f"{e.name:<18} {e.wall_seconds:>10.3f} {e.tuples_per_second:>12.1f} {ratio:>8.1f}x")
        return "\n".join(lines)


def _sweep(x, order, cfg, workers):
    if order == 2:
        m = build_pairwise_view(x, cfg, workers=workers)
        iu = np.triu_indices(x.num_channels, 1)
        return m.values[iu], len(m.defects)
    t = build_order_view(x, order, cfg, workers=workers, max_defect_fraction=1.0)
    return t.values, len(t.defects)


def run_benchmark(num_channels: int, num_timepoints: int, order: int,
                  estimators: Sequence[Estimator | str], cfg: EstimatorConfig,
                  structure: Structure = White(), workers: int = 1,
                  data: TimeSeriesMatrix | None = None) -> BenchReport:
    """Full C-choose-K sweep per estimator on one shared dataset; times the sweep only."""
    names = [Estimator(e) for e in estimators]
    if not names:
        raise InputError("at least one estimator is required")
    if len(set(names)) != len(names):
        raise InputError("duplicate estimator in benchmark")
    if order not in (2, 3, 4):
        raise InputError(f"order must be 2, 3 or 4, got {order}")
    x = data if data is not None else synth_dataset(num_channels, num_timepoints, cfg.master_seed, structure)
    configs = [cfg.replace(estimator=e) for e in names]
    report = BenchReport(config={
        "channels": x.num_channels, "timepoints": x.num_timepoints, "order": order,
        "estimators": [e.value for e in names], "structure": repr(structure),
        "workers": workers, "input_digest": x.digest(), "estimator_config": cfg.to_dict(),
    })
    for e, c in zip(names, configs):
        start = time.perf_counter()
        values, defects = _sweep(x, order, c, workers)
        elapsed = time.perf_counter() - start
        report.per_estimator.append(EstimatorTiming(
            e.value, elapsed, len(values) / elapsed if elapsed > 0 else float("inf"),
            int(len(values)), defects, content_digest(np.ascontiguousarray(values).tobytes())))
    baseline = Estimator.RENYI_EXACT if Estimator.RENYI_EXACT in names else names[0]
    report.baseline = baseline.value
    base = next(t for t in report.per_estimator if t.name == baseline.value)
    if len(names) == 1:
        report.ratios = {base.name: 1.0}
    else:
        report.ratios = {t.name: base.wall_seconds / t.wall_seconds
                         for t in report.per_estimator if t.name != base.name}
    return report
