"""Forward pass of the 4D cross-shaped edge-to-edge, edge-to-node and node-to-graph layers.

Feature tensors are dense ``(M, C, C, C, C)`` arrays; this is a verification
reference meant for C <= 16. Boundaries are zero-padded and the layers carry
no bias or nonlinearity.

Cross-kernel weights have shape ``(M, N, 4, 2, K)``: ``w[m, n, d, 0, c-1]``
multiplies the neighbour at offset ``+c`` along spatial axis ``d`` and
``w[m, n, d, 1, c-1]`` the one at ``-c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InputError

MAX_DENSE_CHANNELS = 16


def _check_features(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 5 or not (x.shape[1] == x.shape[2] == x.shape[3] == x.shape[4]):
        raise InputError(f"feature tensor must have shape (M, C, C, C, C), got {x.shape}")
    if min(x.shape) < 1:
        raise InputError("feature tensor dimensions must be >= 1")
    if not np.all(np.isfinite(x)):
        raise InputError("feature tensor has non-finite entries")
    return x


@dataclass(frozen=True, eq=False)
class CrossKernel4D:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 5 or w.shape[2:4] != (4, 2) or w.shape[4] < 1:
            raise InputError(f"cross-kernel weights must have shape (M, N, 4, 2, K), got {w.shape}")
        object.__setattr__(self, "weights", w)

    @property
    def in_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def radius(self) -> int:
        return self.weights.shape[4]

    @property
    def parameter_count(self) -> int:
        return self.weights.size

    @property
    def full_kernel_parameter_count(self) -> int:
        """Weights of a dense (2K+1)^4 kernel with the same channels, for comparison."""
        return self.in_channels * self.out_channels * (2 * self.radius + 1) ** 4

    @classmethod
    def random(cls, in_channels, out_channels, radius, rng) -> "CrossKernel4D":
        return cls(rng.standard_normal((in_channels, out_channels, 4, 2, radius)))


@dataclass(frozen=True, eq=False)
class E2NWeights:
    """Per-(m, n) mode weights, each of shape ``(M, N)``."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        shapes = set()
        for name in ("alpha", "beta", "gamma", "delta"):
            a = np.atleast_2d(np.asarray(getattr(self, name), dtype=np.float64))
            object.__setattr__(self, name, a)
            shapes.add(a.shape)
        if len(shapes) != 1 or len(next(iter(shapes))) != 2:
            raise InputError(f"E2N weights must share one (M, N) shape, got {sorted(shapes)}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.alpha.shape

    @property
    def stacked(self) -> np.ndarray:
        return np.stack([self.alpha, self.beta, self.gamma, self.delta])

    @classmethod
    def random(cls, in_channels, out_channels, rng) -> "E2NWeights":
        return cls(*rng.standard_normal((4, in_channels, out_channels)))


def _shift(x: np.ndarray, axis: int, offset: int) -> np.ndarray:
    """``y[..., i, ...] = x[..., i + offset, ...]`` with zeros outside the range."""
    y = np.zeros_like(x)
    n = x.shape[axis]
    src = [slice(None)] * x.ndim
    dst = [slice(None)] * x.ndim
    if offset >= 0:
        src[axis] = slice(offset, n)
        dst[axis] = slice(0, n - offset)
    else:
        src[axis] = slice(0, n + offset)
        dst[axis] = slice(-offset, n)
    y[tuple(dst)] = x[tuple(src)]
    return y


def e2e_forward(x: np.ndarray, kernel: CrossKernel4D) -> np.ndarray:
    """Cross-shaped 4D edge-to-edge convolution; returns ``(N, C, C, C, C)``."""
    x = _check_features(x)
    if kernel.in_channels != x.shape[0]:
        raise InputError(f"kernel expects {kernel.in_channels} input channels, got {x.shape[0]}")
    c = x.shape[1]
    if kernel.radius >= c:
        raise InputError(f"kernel radius {kernel.radius} must be < C={c}")
    out = np.zeros((kernel.out_channels,) + x.shape[1:])
    w = kernel.weights
    for d in range(4):
        for off in range(1, kernel.radius + 1):
            for sign, step in ((0, off), (1, -off)):
                shifted = _shift(x, 1 + d, step)
                out += np.tensordot(w[:, :, d, sign, off - 1], shifted, axes=([0], [0]))
    return out


def e2n_forward(x: np.ndarray, weights: E2NWeights, out_channels: int | None = None) -> np.ndarray:
    """Edge-to-node aggregation over every 4-way interaction containing node i; ``(N, C)``."""
    x = _check_features(x)
    m, n = weights.shape
    if m != x.shape[0]:
        raise InputError(f"E2N weights expect {m} input channels, got {x.shape[0]}")
    if out_channels is not None and out_channels != n:
        raise InputError(f"E2N weights have {n} output channels, requested {out_channels}")
    # node i sitting in mode 0, 1, 2, 3 of the 4-way tensor
    mode_sums = np.stack([
        x.sum(axis=(2, 3, 4)),
        x.sum(axis=(1, 3, 4)),
        x.sum(axis=(1, 2, 4)),
        x.sum(axis=(1, 2, 3)),
    ])  # (4, M, C)
    return np.einsum("qmn,qmc->nc", weights.stacked, mode_sums)


def n2g_pool(nodes: np.ndarray) -> np.ndarray:
    """Global average over node positions; exactly invariant to node order."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=np.float64))
    if nodes.ndim != 2 or nodes.shape[1] < 1:
        raise InputError(f"node features must have shape (N, C) with C >= 1, got {nodes.shape}")
    c = nodes.shape[1]
    # fsum is correctly rounded, hence independent of summation order
    return np.array([math.fsum(row) / c for row in nodes.tolist()])


# --------------------------------------------------------------------------
# literal-loop references of the layer equations


def e2e_reference(x: np.ndarray, kernel: CrossKernel4D) -> np.ndarray:
    x = _check_features(x)
    m_in, c = x.shape[0], x.shape[1]
    w = kernel.weights
    out = np.zeros((kernel.out_channels,) + x.shape[1:])

    def at(m, i, j, k, l):
        if 0 <= i < c and 0 <= j < c and 0 <= k < c and 0 <= l < c:
            return x[m, i, j, k, l]
        return 0.0

    for n in range(kernel.out_channels):
        for i, j, k, l in product(range(c), repeat=4):
            s = 0.0
            for m in range(m_in):
                for cc in range(1, kernel.radius + 1):
                    s += (w[m, n, 0, 0, cc - 1] * at(m, i + cc, j, k, l)
                          + w[m, n, 0, 1, cc - 1] * at(m, i - cc, j, k, l)
                          + w[m, n, 1, 0, cc - 1] * at(m, i, j + cc, k, l)
                          + w[m, n, 1, 1, cc - 1] * at(m, i, j - cc, k, l)
                          + w[m, n, 2, 0, cc - 1] * at(m, i, j, k + cc, l)
                          + w[m, n, 2, 1, cc - 1] * at(m, i, j, k - cc, l)
                          + w[m, n, 3, 0, cc - 1] * at(m, i, j, k, l + cc)
                          + w[m, n, 3, 1, cc - 1] * at(m, i, j, k, l - cc))
            out[n, i, j, k, l] = s
    return out


def e2n_reference(x: np.ndarray, weights: E2NWeights) -> np.ndarray:
    x = _check_features(x)
    m_in, c = x.shape[0], x.shape[1]
    n_out = weights.shape[1]
    out = np.zeros((n_out, c))
    for n in range(n_out):
        for i in range(c):
            s = 0.0
            for m in range(m_in):
                a, b, g, d = (weights.alpha[m, n], weights.beta[m, n],
                              weights.gamma[m, n], weights.delta[m, n])
                for j, k, l in product(range(c), repeat=3):
                    s += (a * x[m, i, j, k, l] + b * x[m, j, i, k, l]
                          + g * x[m, j, k, i, l] + d * x[m, j, k, l, i])
            out[n, i] = s
    return out


# --------------------------------------------------------------------------
# self-checks


def _close(a, b, tol):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    return float(np.max(np.abs(a - b))) <= tol * scale if a.size else True


def run_checks(sizes=(3, 4, 5), seed: int = 0, tol: float = 1e-12) -> list[tuple[str, bool]]:
    """Oracle-equivalence and symmetry checks; returns ``(name, passed)`` pairs."""
    rng = np.random.default_rng(seed)
    results = []
    for c in sizes:
        if c > MAX_DENSE_CHANNELS:
            raise InputError(f"C={c} exceeds the dense bound C <= {MAX_DENSE_CHANNELS}")
        if c < 2:
            raise InputError("C must be >= 2")
        m, n, radius = 2, 2, min(2, c - 1)
        x = rng.standard_normal((m,) + (c,) * 4)
        y = rng.standard_normal((m,) + (c,) * 4)
        ker = CrossKernel4D.random(m, n, radius, rng)
        e2n_w = E2NWeights.random(m, n, rng)

        out = e2e_forward(x, ker)
        results.append((f"C={c} e2e matches literal oracle", _close(out, e2e_reference(x, ker), tol)))
        nodes = e2n_forward(x, e2n_w)
        results.append((f"C={c} e2n matches literal oracle", _close(nodes, e2n_reference(x, e2n_w), tol)))
        results.append((f"C={c} e2e parameter count = M*N*8K",
                        ker.parameter_count == m * n * 8 * radius < ker.full_kernel_parameter_count))

        a, b = rng.standard_normal(2)
        results.append((f"C={c} e2e linear", _close(e2e_forward(a * x + b * y, ker),
                                                     a * out + b * e2e_forward(y, ker), 1e-10)))
        results.append((f"C={c} e2n linear", _close(e2n_forward(a * x + b * y, e2n_w),
                                                     a * nodes + b * e2n_forward(y, e2n_w), 1e-10)))

        flipped = x[:, ::-1, ::-1, ::-1, ::-1]
        mirrored = CrossKernel4D(ker.weights[:, :, :, ::-1, :])
        results.append((f"C={c} e2e commutes with index reversal",
                        _close(e2e_forward(flipped, mirrored), out[:, ::-1, ::-1, ::-1, ::-1], tol)))
        axes = tuple(rng.permutation(4))
        swapped = CrossKernel4D(ker.weights[:, :, list(axes)])
        results.append((f"C={c} e2e commutes with axis transposition",
                        _close(e2e_forward(np.transpose(x, (0,) + tuple(a + 1 for a in axes)), swapped),
                               np.transpose(out, (0,) + tuple(a + 1 for a in axes)), tol)))

        perm = rng.permutation(c)
        relabeled = x[np.ix_(range(m), perm, perm, perm, perm)]
        nodes_p = e2n_forward(relabeled, e2n_w)
        results.append((f"C={c} e2n equivariant under joint relabeling", _close(nodes_p, nodes[:, perm], tol)))
        pooled = n2g_pool(nodes)
        results.append((f"C={c} n2g invariant to node order (bit-exact)",
                        np.array_equal(pooled, n2g_pool(nodes[:, rng.permutation(c)]))))
        results.append((f"C={c} n2g(e2n) invariant under joint relabeling", _close(n2g_pool(nodes_p), pooled, tol)))
    return results
