"""Exhaustive construction of the pairwise MI view and the order-3/4 O-information tensors.

Tuples are split into fixed-size contiguous rank blocks. The block layout
depends only on (C, K, estimator), never on the worker count, and every
block writes to its own pre-assigned output slots, so the result is
bit-identical for any number of workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from . import gaussian, renyi
from .combinatorics import enumerate_tuples, num_tuples, split_ranges, tuple_block
from .core import Defect, EstimatorConfig, InteractionTensor, PairwiseMatrix, TimeSeriesMatrix
from .core import standardize as _standardize
from .errors import DefectThresholdExceeded, HoiError, InputError

__all__ = [
    "build_pairwise_view", "build_order_view", "sparsify_top_fraction", "enumerate_tuples",
    "full_covariance",
]

GAUSSIAN_BLOCK = 16384
RENYI_BLOCK = 64
MAX_DEFECT_FRACTION = 0.01

Progress = Callable[[int, int, float], None]


class _Throttle:
    """Forwards progress at most every 0.1 s; the final update is always delivered."""

    interval = 0.1

    def __init__(self, observer: Progress | None, total: int):
        self.observer = observer
        self.total = total
        self.start = time.perf_counter()
        self.last = -math.inf

    def __call__(self, done: int) -> None:
        if self.observer is None:
            return
        now = time.perf_counter()
        if done >= self.total:
            wait = self.last + self.interval - now
            if wait > 0:
                time.sleep(wait)
                now = time.perf_counter()
        elif now - self.last < self.interval:
            return
        self.last = now
        self.observer(done, self.total, now - self.start)


def full_covariance(x: TimeSeriesMatrix) -> np.ndarray:
    """C x C sample covariance (1/(T-1)) built from its upper triangle."""
    centered = x.values - x.values.mean(axis=1, keepdims=True)
    s = centered @ centered.T / (x.num_timepoints - 1)
    upper = np.triu(s)
    return upper + np.triu(s, 1).T


def _gaussian_block(cov: np.ndarray, idx: np.ndarray, ridge: float, measure: str):
    k = idx.shape[1]
    sig = cov[idx[:, :, None], idx[:, None, :]]
    if ridge:
        tr = np.trace(sig, axis1=1, axis2=2)
        d = np.arange(k)
        sig[:, d, d] += (ridge * (tr / k))[:, None]
    tc, _, o, status = gaussian.oinfo_from_covariances(sig)
    msgs = {}
    for r in np.flatnonzero(status != gaussian.OK).tolist():
        t = tuple(idx[r].tolist())
        if status[r] == gaussian.SINGULAR_JOINT:
            msgs[r] = f"covariance of tuple {t} is not positive definite"
        else:
            msgs[r] = (f"principal minor excluding position {status[r] - gaussian.SINGULAR_JOINT - 1}"
                       f" of tuple {t} is not positive definite")
    # at K=2, TC is the Gaussian mutual information
    return (tc if measure == "mi" else o), msgs


def _renyi_block(x: TimeSeriesMatrix, idx: np.ndarray, cfg: EstimatorConfig, cache):
    vals = np.full(idx.shape[0], np.nan)
    msgs = {}
    for r, row in enumerate(idx.tolist()):
        try:
            vals[r] = _renyi_value(x, tuple(row), cfg, cache)
        except HoiError as exc:
            msgs[r] = str(exc)
    return vals, msgs


def _renyi_value(x, t, cfg, cache) -> float:
    if len(t) == 2:
        return renyi.pairwise_mi(x, t[0], t[1], cfg, cache)
    return renyi.renyi_oinfo(x, t, cfg, cache)


def _sweep(x: TimeSeriesMatrix, order: int, cfg: EstimatorConfig, workers: int,
           progress: Progress | None, measure: str):
    """Evaluate every tuple of ``order`` in rank order; returns (values, {rank: message})."""
    c = x.num_channels
    total = num_tuples(c, order)
    if cfg.is_renyi:
        cache = renyi.KernelCache(x, cfg)
        blocks = split_ranges(total, RENYI_BLOCK)

        def run(block):
            idx = tuple_block(c, order, *block)
            return _renyi_block(x, idx, cfg, cache)
    else:
        xs = _standardize(x) if cfg.should_standardize else x
        cov = full_covariance(xs)
        blocks = split_ranges(total, GAUSSIAN_BLOCK)
        ridge = cfg.ridge

        def run(block):
            idx = tuple_block(c, order, *block)
            return _gaussian_block(cov, idx, ridge, measure)

    values = np.empty(total)
    defects: dict[int, str] = {}
    throttle = _Throttle(progress, total)
    done = 0

    def finish(block, result):
        nonlocal done
        vals, msgs = result
        values[block[0]:block[1]] = vals
        for r, m in msgs.items():
            defects[block[0] + r] = m
        done += block[1] - block[0]
        throttle(done)

    workers = max(1, int(workers))
    if workers == 1 or len(blocks) == 1:
        for b in blocks:
            finish(b, run(b))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for b, res in zip(blocks, pool.map(run, blocks)):
                finish(b, res)
    if total == 0:
        throttle(0)
    return values, defects


def build_pairwise_view(x: TimeSeriesMatrix, cfg: EstimatorConfig, workers: int = 1,
                        progress: Progress | None = None) -> PairwiseMatrix:
    """Symmetric mutual-information matrix over all channel pairs (zero diagonal).

    Failed pairs are NaN and listed in ``defects``.
    """
    c = x.num_channels
    values, defects = _sweep(x, 2, cfg, workers, progress, "mi")
    m = np.zeros((c, c))
    iu = np.triu_indices(c, 1)
    m[iu] = values
    m[(iu[1], iu[0])] = values
    idx = tuple_block(c, 2, 0, len(values))
    recs = [Defect(tuple(idx[r].tolist()), msg) for r, msg in sorted(defects.items())]
    return PairwiseMatrix(m, recs, cfg.tag)


def build_order_view(x: TimeSeriesMatrix, order: int, cfg: EstimatorConfig,
                     progress: Progress | None = None, workers: int = 1,
                     max_defect_fraction: float = MAX_DEFECT_FRACTION) -> InteractionTensor:
    """O-information of every sorted ``order``-tuple of channels.

    Per-tuple failures become defects. Raises :class:`DefectThresholdExceeded`
    (carrying the partial tensor) if more than ``max_defect_fraction`` of
    tuples fail.
    """
    if order not in (3, 4):
        raise InputError(f"order must be 3 or 4, got {order}")
    c = x.num_channels
    if c < order:
        raise InputError(f"need at least {order} channels, got {c}")
    values, defects = _sweep(x, order, cfg, workers, progress, "oinfo")
    total = values.shape[0]
    keep = np.ones(total, dtype=bool)
    keep[list(defects)] = False
    idx = tuple_block(c, order, 0, total)
    recs = [Defect(tuple(idx[r].tolist()), msg) for r, msg in sorted(defects.items())]
    tensor = InteractionTensor(order, c, idx[keep], values[keep], cfg.tag, recs)
    if total and len(defects) / total > max_defect_fraction:
        raise DefectThresholdExceeded(
            f"{len(defects)} of {total} tuples failed (> {max_defect_fraction:.0%})", result=tensor)
    return tensor


def sparsify_top_fraction(m: PairwiseMatrix, fraction: float = 0.30) -> PairwiseMatrix:
    """Keep the ``ceil(fraction * P)`` strongest pairs by |value|, zero the rest.

    ``P`` counts finite off-diagonal pairs; ties at the cutoff go to the
    lexicographically smaller ``(i, j)``. NaN sentinels are left in place.
    """
    if not 0 < fraction <= 1:
        raise InputError(f"fraction must lie in (0, 1], got {fraction}")
    c = m.num_channels
    iu = np.triu_indices(c, 1)
    upper = m.values[iu]
    finite = np.flatnonzero(np.isfinite(upper))
    if finite.size == 0:
        raise InputError("no finite off-diagonal entries to rank")
    n_keep = math.ceil(round(fraction * finite.size, 9))
    order = np.lexsort((finite, -np.abs(upper[finite])))
    kept = finite[order[:n_keep]]
    out = np.where(np.isfinite(upper), 0.0, upper)
    out[kept] = upper[kept]
    res = np.zeros((c, c))
    res[iu] = out
    res[(iu[1], iu[0])] = out
    return PairwiseMatrix(res, m.defects, m.estimator_tag)
