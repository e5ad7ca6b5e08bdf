"""Closed-form Gaussian entropy, total correlation, dual total correlation, O-information.

All log-determinants come from Cholesky pivots (``log det = sum log pivot``)
computed on the upper triangle. TC and DTC are assembled from the same
cached pivots: the marginal variances, the joint, and the K leave-one-out
principal minors. The ``(2 pi e)`` terms cancel in TC/DTC and are never
materialised there, so at K=2 both reduce to the identical expression and
O-information is exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .combinatorics import canonical
from .core import TimeSeriesMatrix
from .errors import SingularCovarianceError

LOG_2PIE = math.log(2 * math.pi * math.e)

# status codes returned by oinfo_from_covariances
OK = 0
SINGULAR_JOINT = 1
# SINGULAR_JOINT + 1 + i: leave-one-out minor excluding position i failed

# pivots at or below this fraction of their diagonal entry are round-off of an exact zero
PIVOT_RTOL = 1e-13


def chol_logdet(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched Cholesky log-determinant of symmetric ``(..., n, n)`` matrices.

    Reads only the upper triangle. Returns ``(logdet, ok)`` where ``ok`` is
    False wherever a pivot is not above ``PIVOT_RTOL`` times its diagonal
    entry (logdet is NaN there).
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[-1]
    batch = a.shape[:-2]
    low = np.zeros(batch + (n, n))
    logdet = np.zeros(batch)
    ok = np.ones(batch, dtype=bool)
    for j in range(n):
        pivot = a[..., j, j] - np.sum(low[..., j, :j] ** 2, axis=-1)
        good = pivot > PIVOT_RTOL * a[..., j, j]
        ok &= good
        safe = np.where(good, pivot, 1.0)
        logdet += np.log(safe)
        d = np.sqrt(safe)
        low[..., j, j] = d
        for i in range(j + 1, n):
            low[..., i, j] = (a[..., j, i] - np.sum(low[..., i, :j] * low[..., j, :j], axis=-1)) / d
    logdet = np.where(ok, logdet, np.nan)
    return logdet, ok


def oinfo_from_covariances(sigmas: np.ndarray):
    """TC, DTC and O for a batch of ``(B, K, K)`` covariances.

    Returns ``(tc, dtc, o, status)``; entries with nonzero status are NaN.
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    k = sigmas.shape[-1]
    joint, ok_joint = chol_logdet(sigmas)
    singles = []
    minors = []
    status = np.where(ok_joint, OK, SINGULAR_JOINT)
    for i in range(k):
        s, _ = chol_logdet(sigmas[..., i:i + 1, i:i + 1])
        singles.append(s)
        keep = [j for j in range(k) if j != i]
        m, ok_m = chol_logdet(sigmas[..., keep, :][..., :, keep])
        minors.append(m)
        status = np.where((status == OK) & ~ok_m, SINGULAR_JOINT + 1 + i, status)
    sum_singles = singles[0]
    sum_minors = minors[0]
    for i in range(1, k):
        sum_singles = sum_singles + singles[i]
        sum_minors = sum_minors + minors[i]
    tc = 0.5 * (sum_singles - joint)
    dtc = 0.5 * (sum_minors - (k - 1) * joint)
    bad = status != OK
    tc = np.where(bad, np.nan, tc)
    dtc = np.where(bad, np.nan, dtc)
    return tc, dtc, tc - dtc, status


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """K x K covariance of a channel tuple; ``tuple`` is kept for error reporting."""

    values: np.ndarray
    tuple: tuple[int, ...] | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ValueError(f"covariance must be square, got shape {v.shape}")
        scale = np.max(np.abs(v)) if v.size else 0.0
        if np.any(np.abs(v - v.T) > 1e-12 * scale):
            raise ValueError("covariance is not symmetric")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @cached_property
    def _terms(self):
        return oinfo_from_covariances(self.values[None])

    @cached_property
    def _joint_logdet(self) -> float:
        ld, ok = chol_logdet(self.values)
        if not ok:
            raise SingularCovarianceError(
                f"covariance of tuple {self.tuple} is not positive definite", tuple=self.tuple)
        return float(ld)

    def _check(self):
        status = int(self._terms[3][0])
        if status == SINGULAR_JOINT:
            raise SingularCovarianceError(
                f"covariance of tuple {self.tuple} is not positive definite", tuple=self.tuple)
        if status > SINGULAR_JOINT:
            i = status - SINGULAR_JOINT - 1
            raise SingularCovarianceError(
                f"principal minor excluding position {i} of tuple {self.tuple} is not positive definite",
                tuple=self.tuple, excluded=i)

    def minor(self, i: int) -> "CovarianceMatrix":
        keep = [j for j in range(self.dim) if j != i]
        sub = None if self.tuple is None else tuple(t for j, t in enumerate(self.tuple) if j != i)
        return CovarianceMatrix(self.values[np.ix_(keep, keep)], sub)


def covariance(x: TimeSeriesMatrix, tuple: Sequence[int], ridge: float = 1e-10) -> CovarianceMatrix:
    """Sample covariance (1/(T-1)) of the selected channels plus ``ridge * trace/K`` on the diagonal."""
    t = canonical(tuple, x.num_channels) if len(tuple) else ()
    rows = x.values[list(t)]
    centered = rows - rows.mean(axis=1, keepdims=True)
    k = len(t)
    cov = np.empty((k, k))
    denom = x.num_timepoints - 1
    for i in range(k):
        for j in range(i, k):
            cov[i, j] = cov[j, i] = np.dot(centered[i], centered[j]) / denom
    if ridge:
        cov[np.diag_indices(k)] += ridge * (np.trace(cov) / k)
    return CovarianceMatrix(cov, t)


def gaussian_entropy(sigma: CovarianceMatrix) -> float:
    """Differential entropy ``0.5 * log((2 pi e)^K det sigma)`` in nats."""
    return 0.5 * (sigma.dim * LOG_2PIE + sigma._joint_logdet)


def gaussian_tc(sigma: CovarianceMatrix) -> float:
    sigma._check()
    return float(sigma._terms[0][0])


def gaussian_dtc(sigma: CovarianceMatrix) -> float:
    sigma._check()
    return float(sigma._terms[1][0])


def gaussian_oinfo(sigma: CovarianceMatrix) -> float:
    """TC - DTC: positive when redundancy dominates, negative for synergy."""
    sigma._check()
    return float(sigma._terms[2][0])


def gaussian_conditional_entropy(sigma: CovarianceMatrix, i: int) -> float:
    """H(X_i | rest) as the difference of joint and leave-one-out entropies."""
    return gaussian_entropy(sigma) - gaussian_entropy(sigma.minor(i))


def gaussian_mi(rho: float) -> float:
    """Mutual information of a bivariate Gaussian with correlation ``rho``."""
    return -0.5 * math.log1p(-rho * rho)
