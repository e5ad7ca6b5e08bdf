"""Lexicographic K-combinations of channel indices: enumeration, ranking, unranking.

Ranks follow lexicographic order of strictly increasing tuples, so rank 0 of
(C, K) is ``(0, 1, ..., K-1)`` and the last rank is ``(C-K, ..., C-1)``.
Unranking lets a sweep be split into contiguous rank ranges that workers can
materialise independently.
"""

from __future__ import annotations

import itertools
from math import comb
from typing import Iterator, Sequence

import numpy as np

from .errors import InputError

TupleIndex = tuple  # canonical form: strictly increasing tuple of ints


def canonical(indices: Sequence[int], num_channels: int | None = None) -> tuple[int, ...]:
    """Sorted, validated tuple of channel indices (duplicates are rejected)."""
    t = tuple(sorted(int(i) for i in indices))
    if len(t) < 1:
        raise InputError("empty tuple")
    if any(a == b for a, b in zip(t, t[1:])):
        raise InputError(f"duplicate channel index in tuple {tuple(indices)}")
    if t[0] < 0 or (num_channels is not None and t[-1] >= num_channels):
        raise InputError(f"tuple {tuple(indices)} out of range for {num_channels} channels")
    return t


def num_tuples(num_channels: int, order: int) -> int:
    return comb(num_channels, order)


def _check(num_channels: int, order: int) -> None:
    if order < 1 or num_channels < order:
        raise InputError(f"need 1 <= K <= C, got C={num_channels}, K={order}")


def rank(t: Sequence[int], num_channels: int) -> int:
    """Lexicographic rank of a sorted combination of ``range(num_channels)``."""
    k = len(t)
    _check(num_channels, k)
    total = comb(num_channels, k)
    return total - 1 - sum(comb(num_channels - 1 - c, k - i) for i, c in enumerate(t))


def unrank(r: int, num_channels: int, order: int) -> tuple[int, ...]:
    """Inverse of :func:`rank`."""
    _check(num_channels, order)
    total = comb(num_channels, order)
    if not 0 <= r < total:
        raise InputError(f"rank {r} outside [0, {total})")
    rem = total - 1 - r
    out = []
    m = num_channels - 1
    for i in range(order):
        e = order - i
        while comb(m, e) > rem:
            m -= 1
        out.append(num_channels - 1 - m)
        rem -= comb(m, e)
        m -= 1
    return tuple(out)


def _binom_table(num_channels: int, order: int) -> np.ndarray:
    table = np.zeros((order + 1, num_channels), dtype=np.int64)
    for e in range(order + 1):
        for m in range(num_channels):
            table[e, m] = comb(m, e)
    return table


def rank_array(indices: np.ndarray, num_channels: int) -> np.ndarray:
    """Vectorised :func:`rank` over the rows of an ``(n, K)`` integer array."""
    indices = np.asarray(indices, dtype=np.int64)
    n, k = indices.shape
    _check(num_channels, k)
    if comb(num_channels, k) >= 2**62:
        raise InputError("combination count exceeds int64 range")
    table = _binom_table(num_channels, k)
    acc = np.zeros(n, dtype=np.int64)
    for i in range(k):
        acc += table[k - i, num_channels - 1 - indices[:, i]]
    return comb(num_channels, k) - 1 - acc


def tuple_block(num_channels: int, order: int, start: int, stop: int) -> np.ndarray:
    """Combinations with ranks ``start..stop-1`` as an ``(stop-start, K)`` array."""
    _check(num_channels, order)
    total = comb(num_channels, order)
    if not 0 <= start <= stop <= total:
        raise InputError(f"rank range [{start}, {stop}) outside [0, {total}]")
    if total >= 2**62:
        raise InputError("combination count exceeds int64 range")
    table = _binom_table(num_channels, order)
    rem = (total - 1) - np.arange(start, stop, dtype=np.int64)
    out = np.empty((stop - start, order), dtype=np.int64)
    for i in range(order):
        row = table[order - i]
        m = np.searchsorted(row, rem, side="right") - 1
        out[:, i] = num_channels - 1 - m
        rem = rem - row[m]
    return out


def enumerate_tuples(num_channels: int, order: int, start: int = 0,
                     stop: int | None = None) -> Iterator[tuple[int, ...]]:
    """Lexicographic stream of K-combinations, optionally restricted to a rank range."""
    _check(num_channels, order)
    total = comb(num_channels, order)
    stop = total if stop is None else stop
    if not 0 <= start <= stop <= total:
        raise InputError(f"rank range [{start}, {stop}) outside [0, {total}]")
    if start == stop:
        return iter(())
    if start == 0:
        return itertools.islice(itertools.combinations(range(num_channels), order), stop)
    return _walk(unrank(start, num_channels, order), num_channels, stop - start)


def _walk(first: tuple[int, ...], n: int, count: int) -> Iterator[tuple[int, ...]]:
    c = list(first)
    k = len(c)
    for _ in range(count):
        yield tuple(c)
        i = k - 1
        while i >= 0 and c[i] == n - k + i:
            i -= 1
        if i < 0:
            return
        c[i] += 1
        for j in range(i + 1, k):
            c[j] = c[j - 1] + 1


def split_ranges(total: int, block_size: int) -> list[tuple[int, int]]:
    """Contiguous ``[start, stop)`` rank ranges of at most ``block_size`` items."""
    if block_size < 1:
        raise InputError("block_size must be >= 1")
    return [(s, min(s + block_size, total)) for s in range(0, total, block_size)]
