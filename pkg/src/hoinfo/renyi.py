"""Matrix-based Renyi alpha-entropy on Gaussian-kernel Gram matrices.

Two backends share one interface: an exact one (eigenvalues of the
trace-normalised Gram matrix) and a randomized one (Hutchinson trace
estimation of ``tr(G^alpha)`` for integer alpha using only matrix products
with a block of Gaussian probes). Joint entropies use the Hadamard product
of the per-variable kernel matrices.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .combinatorics import canonical
from .core import MEDIAN, Estimator, EstimatorConfig, TimeSeriesMatrix
from .errors import DegenerateBandwidthError, EstimatorError, HoiError, InputError

EIG_CLAMP = 1e-10


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """n x n kernel matrix; ``normalized`` means divided by its trace."""

    values: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError(f"Gram matrix must be square, got {v.shape}")
        if v.flags.writeable:
            v = v.copy()
            v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def normalize(self) -> "GramMatrix":
        if self.normalized:
            return self
        return GramMatrix(self.values / np.trace(self.values), True)


def _as_samples(samples) -> np.ndarray:
    s = np.asarray(samples, dtype=np.float64)
    if s.ndim == 1:
        s = s[:, None]
    if s.ndim != 2:
        raise InputError(f"samples must be a sequence of vectors, got shape {s.shape}")
    if s.shape[0] < 2:
        raise InputError("need at least 2 samples for a Gram matrix")
    if not np.all(np.isfinite(s)):
        raise InputError("samples contain non-finite values")
    return s


def median_bandwidth(sq_dists: np.ndarray) -> float:
    """Median pairwise Euclidean distance from condensed squared distances.

    Falls back to the smallest nonzero distance when the median is zero.
    """
    d = np.sqrt(sq_dists)
    sigma = float(np.median(d))
    if sigma == 0.0:
        nz = d[d > 0]
        if nz.size == 0:
            raise DegenerateBandwidthError("all samples identical; median bandwidth is undefined")
        sigma = float(nz.min())
    return sigma


def resolve_bandwidth(samples, bandwidth: float | str = MEDIAN) -> float:
    s = _as_samples(samples)
    if bandwidth == MEDIAN:
        return median_bandwidth(pdist(s, "sqeuclidean"))
    return float(bandwidth)


def kernel_matrix(samples, bandwidth: float | str = MEDIAN) -> GramMatrix:
    """Un-normalised Gaussian kernel matrix (unit diagonal)."""
    s = _as_samples(samples)
    sq = pdist(s, "sqeuclidean")
    if bandwidth == MEDIAN:
        sigma = median_bandwidth(sq)
    else:
        sigma = float(bandwidth)
        if not sigma > 0:
            raise InputError(f"bandwidth must be > 0, got {sigma}")
    k = squareform(np.exp(sq / (-2.0 * sigma * sigma)))
    np.fill_diagonal(k, 1.0)
    return GramMatrix(k, normalized=False)


def gram(samples, bandwidth: float | str = MEDIAN) -> GramMatrix:
    """Trace-normalised Gaussian-kernel Gram matrix."""
    return kernel_matrix(samples, bandwidth).normalize()


def joint_gram(grams: Sequence[GramMatrix]) -> GramMatrix:
    """Hadamard product of un-normalised kernel matrices, then trace-normalised."""
    if len(grams) < 2:
        raise InputError("joint_gram needs at least two kernel matrices")
    n = grams[0].dim
    for g in grams:
        if g.dim != n:
            raise InputError(f"dimension mismatch in joint_gram: {g.dim} != {n}")
        if g.normalized:
            raise InputError("joint_gram expects un-normalised kernel matrices")
    prod = grams[0].values * grams[1].values
    for g in grams[2:]:
        prod *= g.values
    return GramMatrix(prod / np.trace(prod), True)


def _entropy_from_power_trace(trace: float, alpha: float) -> float:
    if not trace > 0:
        raise EstimatorError(f"trace of G^alpha is {trace}; cannot take its log")
    return float(np.log(trace) / (1.0 - alpha))


def renyi_entropy_exact(g: GramMatrix, alpha: float) -> float:
    """``log(sum(lambda^alpha)) / (1 - alpha)`` over the spectrum of ``g``."""
    if not g.normalized:
        raise InputError("renyi_entropy_exact expects a trace-normalised Gram matrix")
    if not alpha > 0 or alpha == 1:
        raise InputError(f"alpha must be > 0 and != 1, got {alpha}")
    lam = np.linalg.eigvalsh(g.values)
    if lam[0] < -EIG_CLAMP:
        raise EstimatorError(f"Gram eigenvalue {lam[0]:.3e} below -{EIG_CLAMP}; matrix is not PSD")
    # round-off eigenvalues of either sign are zeroed; matters for alpha < 1
    lam = np.where(np.abs(lam) <= EIG_CLAMP, 0.0, lam)
    return _entropy_from_power_trace(float(np.sum(lam ** alpha)), alpha)


@dataclass(frozen=True)
class ProbeSet:
    """``count`` standard-normal probes of length ``n`` from a Philox stream keyed by ``seed``."""

    count: int
    seed: int
    n: int

    def vectors(self) -> np.ndarray:
        """Probes as the columns of an ``(n, count)`` array; regenerated on every call."""
        rng = np.random.Generator(np.random.Philox(key=self.seed))
        return rng.standard_normal((self.n, self.count))


def probe_seed(master_seed: int, tuple: Sequence[int], subset: int) -> int:
    """64-bit seed for the probe stream of one entropy term.

    Depends only on the master seed, the sorted tuple, and the subset bitmask,
    never on evaluation order.
    """
    t = sorted(int(i) for i in tuple)
    words = struct.pack(f"<{3 + len(t)}Q", int(master_seed), len(t), int(subset), *t)
    return int.from_bytes(hashlib.blake2b(words, digest_size=8).digest(), "little")


def hutchinson_power_trace(g: GramMatrix, alpha: int, probes: ProbeSet) -> float:
    """``(1/s) sum_i g_i^T G^alpha g_i`` via repeated products with the probe block."""
    if int(alpha) != alpha or alpha < 2:
        raise InputError(f"randomized estimator requires integer alpha >= 2, got {alpha}")
    if probes.n != g.dim:
        raise InputError(f"probe length {probes.n} != Gram dimension {g.dim}")
    alpha = int(alpha)
    p = probes.vectors()
    y = p
    # g^T G^(2m) g = |G^m g|^2, so only half the powers are applied to each side
    for _ in range(alpha // 2):
        y = g.values @ y
    if alpha % 2 == 0:
        q = np.sum(y * y, axis=0)
    else:
        q = np.sum(y * (g.values @ y), axis=0)
    return float(q.sum() / q.shape[0])


def renyi_entropy_randomized(g: GramMatrix, alpha: int, probes: ProbeSet) -> float:
    if not g.normalized:
        raise InputError("renyi_entropy_randomized expects a trace-normalised Gram matrix")
    return _entropy_from_power_trace(hutchinson_power_trace(g, alpha, probes), int(alpha))


# --------------------------------------------------------------------------
# per-channel kernels and tuple-level measures


def channel_kernel(row: np.ndarray, bandwidth: float | str, standardize: bool) -> np.ndarray:
    """Un-normalised kernel matrix over the time points of one channel."""
    row = np.asarray(row, dtype=np.float64)
    if standardize:
        sd = row.std(ddof=1)
        if sd == 0:
            raise InputError("zero-variance channel cannot be standardised")
        row = (row - row.mean()) / sd
    return kernel_matrix(row, bandwidth).values


class KernelCache:
    """Read-only per-channel kernel matrices shared by every tuple of a sweep.

    Holds at most ``max_bytes`` of matrices (least recently used are dropped
    and recomputed on demand; recomputation is deterministic).
    """

    def __init__(self, x: TimeSeriesMatrix, cfg: EstimatorConfig, max_bytes: int | None = None):
        self.x = x
        self.bandwidth = cfg.bandwidth
        self.standardize = cfg.should_standardize
        n = x.num_timepoints
        cap = cfg.kernel_cache_bytes if max_bytes is None else max_bytes
        self.capacity = max(1, int(cap) // (n * n * 8))
        self._store: OrderedDict[int, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()
        self.misses = 0

    def __call__(self, channel: int) -> np.ndarray:
        with self._lock:
            k = self._store.get(channel)
            if k is not None:
                self._store.move_to_end(channel)
                return k
        try:
            k = channel_kernel(self.x.values[channel], self.bandwidth, self.standardize)
        except HoiError as exc:
            raise type(exc)(f"channel {channel}: {exc}") from None
        k.flags.writeable = False
        with self._lock:
            self.misses += 1
            self._store[channel] = k
            while len(self._store) > self.capacity:
                self._store.popitem(last=False)
        return k


def _term_entropy(kernels: list[np.ndarray], mask: int, t: tuple[int, ...],
                  cfg: EstimatorConfig) -> float:
    members = [kernels[i] for i in range(len(kernels)) if mask >> i & 1]
    if len(members) > 1:
        g = members[0] * members[1]
        for k in members[2:]:
            g *= k
        g *= 1.0 / np.trace(g)
    else:
        g = members[0] * (1.0 / np.trace(members[0]))
    g.flags.writeable = False
    g = GramMatrix(g, True)
    if cfg.estimator is Estimator.RENYI_RANDOMIZED:
        probes = ProbeSet(cfg.probes, probe_seed(cfg.master_seed, t, mask), g.dim)
        return renyi_entropy_randomized(g, int(cfg.alpha), probes)
    return renyi_entropy_exact(g, cfg.alpha)


def tuple_entropies(kernels: list[np.ndarray], t: tuple[int, ...], cfg: EstimatorConfig) -> dict[int, float]:
    """Every distinct entropy needed by TC/DTC of one tuple, keyed by subset bitmask.

    Singletons, the K leave-one-out subsets and the full joint: 2K+1 terms
    (3 at K=2, where leave-one-out subsets coincide with the singletons).
    """
    k = len(t)
    full = (1 << k) - 1
    masks = [1 << i for i in range(k)] + [full ^ (1 << i) for i in range(k)] + [full]
    out: dict[int, float] = {}
    for m in masks:
        if m not in out:
            out[m] = _term_entropy(kernels, m, t, cfg)
    return out


def tc_dtc_from_entropies(h: dict[int, float], k: int) -> tuple[float, float]:
    full = (1 << k) - 1
    tc = 0.0
    dtc = 0.0
    for i in range(k):
        tc += h[1 << i]
        dtc += h[full ^ (1 << i)]
    return tc - h[full], dtc - (k - 1) * h[full]


def _renyi_check(cfg: EstimatorConfig) -> None:
    if not cfg.is_renyi:
        raise InputError(f"Renyi estimator requested with config {cfg.estimator.value!r}")


def renyi_tc_dtc(x: TimeSeriesMatrix, tuple: Sequence[int], cfg: EstimatorConfig,
                 kernels: KernelCache | None = None) -> tuple[float, float]:
    _renyi_check(cfg)
    t = canonical(tuple, x.num_channels)
    if len(t) < 2:
        raise InputError("need a tuple of at least two channels")
    kc = kernels or KernelCache(x, cfg)
    try:
        mats = [kc(i) for i in t]
        return tc_dtc_from_entropies(tuple_entropies(mats, t, cfg), len(t))
    except EstimatorError as exc:
        raise EstimatorError(f"tuple {t}: {exc}", tuple=t) from None


def renyi_oinfo(x: TimeSeriesMatrix, tuple: Sequence[int], cfg: EstimatorConfig,
                kernels: KernelCache | None = None) -> float:
    """O-information ``TC_alpha - DTC_alpha`` of one channel tuple."""
    tc, dtc = renyi_tc_dtc(x, tuple, cfg, kernels)
    return tc - dtc


def pairwise_mi(x: TimeSeriesMatrix, i: int, j: int, cfg: EstimatorConfig,
                kernels: KernelCache | None = None) -> float:
    """``H(X_i) + H(X_j) - H(X_i, X_j)``; symmetric in (i, j) by construction."""
    if i == j:
        raise InputError("pairwise_mi needs two distinct channels")
    tc, _ = renyi_tc_dtc(x, (i, j), cfg, kernels)
    return tc


def batch_entropy(latents, cfg: EstimatorConfig) -> float:
    """Exact matrix-based entropy of a mini-batch of latent vectors at ``cfg.ib_alpha``."""
    return renyi_entropy_exact(gram(latents, cfg.bandwidth), cfg.ib_alpha)
