"""Cohort contrasts over interaction tensors: per-tuple group mean/SD, delta, top-k ranking."""

from __future__ import annotations

import csv
import heapq
import warnings
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .combinatorics import num_tuples, tuple_block
from .core import InteractionTensor
from .errors import InputError

CSV_COLUMNS = ["tuple_indices", "mean_a", "sd_a", "mean_b", "sd_b", "delta", "n_a", "n_b"]
MODES = {"abs": "abs", "positive": "positive", "pos": "positive", "negative": "negative", "neg": "negative"}


@dataclass(frozen=True)
class GroupDeltaRecord:
    tuple: tuple[int, ...]
    mean_a: float
    sd_a: float
    mean_b: float
    sd_b: float
    delta: float
    n_a: int
    n_b: int

    def render(self, digits: int = 3) -> str:
        """Report row body, e.g. ``0.211 ± 0.161 | 0.149 ± 0.121 | +0.063``."""
        f = f".{digits}f"
        return (f"{self.mean_a:{f}} ± {self.sd_a:{f}} | {self.mean_b:{f}} ± {self.sd_b:{f}} | "
                f"{self.delta:+{f}}")


class _Welford:
    def __init__(self, size: int):
        self.n = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        d = x - self.mean
        self.mean = self.mean + d / self.n
        self.m2 = self.m2 + d * (x - self.mean)

    def sd(self) -> np.ndarray:
        if self.n < 2:
            return np.where(np.isnan(self.mean), np.nan, 0.0)
        return np.sqrt(self.m2 / (self.n - 1))


class GroupContrast:
    """Per-tuple contrast of group A against group B, lexicographic tuple order.

    Iterating yields :class:`GroupDeltaRecord`. Tuples missing from any
    subject are dropped and listed in ``excluded``.
    """

    def __init__(self, order, num_channels, indices, mean_a, sd_a, mean_b, sd_b, n_a, n_b,
                 excluded, warnings=()):
        self.order = order
        self.num_channels = num_channels
        self.indices = indices
        self.mean_a, self.sd_a = mean_a, sd_a
        self.mean_b, self.sd_b = mean_b, sd_b
        self.delta = mean_a - mean_b
        self.n_a, self.n_b = n_a, n_b
        self.excluded = excluded
        self.warnings = tuple(warnings)

    def __len__(self) -> int:
        return self.indices.shape[0]

    def record(self, r: int) -> GroupDeltaRecord:
        return GroupDeltaRecord(tuple(self.indices[r].tolist()), float(self.mean_a[r]),
                                float(self.sd_a[r]), float(self.mean_b[r]), float(self.sd_b[r]),
                                float(self.delta[r]), self.n_a, self.n_b)

    def __iter__(self) -> Iterator[GroupDeltaRecord]:
        for r in range(len(self)):
            yield self.record(r)


def _check_group(tensors: Sequence[InteractionTensor], name: str) -> None:
    if not tensors:
        raise InputError(f"group {name} is empty")


def group_contrast(tensors_a: Sequence[InteractionTensor],
                   tensors_b: Sequence[InteractionTensor]) -> GroupContrast:
    """Sample mean and SD (1/(n-1)) per tuple in each group, and their difference."""
    tensors_a, tensors_b = list(tensors_a), list(tensors_b)
    _check_group(tensors_a, "A")
    _check_group(tensors_b, "B")
    ref = tensors_a[0]
    for t in tensors_a + tensors_b:
        if (t.order, t.num_channels, t.estimator_tag) != (ref.order, ref.num_channels, ref.estimator_tag):
            raise InputError(
                f"tensor shape mismatch: (order={t.order}, C={t.num_channels}, tag={t.estimator_tag!r})"
                f" vs (order={ref.order}, C={ref.num_channels}, tag={ref.estimator_tag!r})")
    total = num_tuples(ref.num_channels, ref.order)
    acc = {}
    for name, group in (("a", tensors_a), ("b", tensors_b)):
        w = _Welford(total)
        for t in group:
            full = np.full(total, np.nan)
            full[t.ranks] = t.values
            w.add(full)
        acc[name] = w
    notes = []
    for name, w in acc.items():
        if w.n == 1:
            msg = f"group {name.upper()} has a single subject; SD reported as 0"
            warnings.warn(msg)
            notes.append(msg)
    valid = ~(np.isnan(acc["a"].mean) | np.isnan(acc["b"].mean))
    ranks = np.flatnonzero(valid)
    excl = np.flatnonzero(~valid)
    idx = tuple_block(ref.num_channels, ref.order, 0, total)
    excluded = [tuple(r) for r in idx[excl].tolist()]
    return GroupContrast(ref.order, ref.num_channels, idx[ranks],
                         acc["a"].mean[ranks], acc["a"].sd()[ranks],
                         acc["b"].mean[ranks], acc["b"].sd()[ranks],
                         acc["a"].n, acc["b"].n, excluded, notes)


def _score(delta: float, mode: str) -> float:
    if mode == "abs":
        return -abs(delta)
    if mode == "positive":
        return -delta
    return delta


def top_k_by_delta(records: Iterable[GroupDeltaRecord] | GroupContrast, k: int,
                   mode: str = "abs") -> list[GroupDeltaRecord]:
    """Top ``k`` records by |delta|, delta or -delta; ties go to the smaller tuple."""
    if k < 1:
        raise InputError("k must be >= 1")
    try:
        mode = MODES[mode]
    except KeyError:
        raise InputError(f"mode must be one of abs|positive|negative, got {mode!r}") from None
    if isinstance(records, GroupContrast):
        d = records.delta
        score = -np.abs(d) if mode == "abs" else (-d if mode == "positive" else d)
        keys = [records.indices[:, j] for j in range(records.order - 1, -1, -1)]
        order = np.lexsort(keys + [score])
        return [records.record(int(r)) for r in order[:k]]
    return heapq.nsmallest(k, records, key=lambda rec: (_score(rec.delta, mode), rec.tuple))


def _fmt_row(rec: GroupDeltaRecord) -> list[str]:
    return [",".join(map(str, rec.tuple)), repr(rec.mean_a), repr(rec.sd_a), repr(rec.mean_b),
            repr(rec.sd_b), repr(rec.delta), str(rec.n_a), str(rec.n_b)]


def write_report(records: Iterable[GroupDeltaRecord], path) -> int:
    """Semicolon-separated report in iteration order; returns the row count."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=";")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow(_fmt_row(rec))
            n += 1
    return n


def read_report(path) -> list[GroupDeltaRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh, delimiter=";")
        header = next(rows)
        if header != CSV_COLUMNS:
            raise InputError(f"{path}: unexpected header {header}")
        for row in rows:
            t = tuple(int(i) for i in row[0].split(","))
            out.append(GroupDeltaRecord(t, *map(float, row[1:6]), int(row[6]), int(row[7])))
    return out
