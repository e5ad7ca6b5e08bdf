"""Shared data model: time series, estimator configuration, interaction tensors.

Also holds the on-disk formats: CSV / raw-f64 time-series input, the binary
HOIT tensor file, and the JSON manifests written next to every artifact.

HOIT layout (all little-endian)::

    b"HOIT" | u32 version=1 | u8 order | u32 num_channels | u64 entry count
    | u16 tag length | tag (UTF-8)
    | entries, lexicographic by indices: order x u32 index, f64 value
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import combinatorics
from .errors import InputError

HOIT_MAGIC = b"HOIT"
HOIT_VERSION = 1
_HOIT_HEADER = struct.Struct("<4sIBIQ")


# --------------------------------------------------------------------------
# time series


@dataclass(frozen=True, eq=False)
class TimeSeriesMatrix:
    """One subject's channel-by-time matrix (rows = channels)."""

    values: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if v.ndim != 2:
            raise InputError(f"time series must be 2-D (channels x time), got shape {v.shape}")
        c, t = v.shape
        if c < 2 or t < 2:
            raise InputError(f"need at least 2 channels and 2 time points, got C={c}, T={t}")
        bad = np.argwhere(~np.isfinite(v))
        if bad.size:
            r, col = bad[0]
            raise InputError(f"non-finite value {v[r, col]!r} at (row {r}, column {col})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != c:
                raise InputError(f"{len(labels)} labels for {c} channels")
            object.__setattr__(self, "labels", labels)

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]

    @property
    def num_timepoints(self) -> int:
        return self.values.shape[1]

    def digest(self) -> str:
        return content_digest(self.values.tobytes())


def content_digest(data: bytes) -> str:
    """64-bit BLAKE2b content hash as 16 hex characters."""
    return hashlib.blake2b(data, digest_size=8).hexdigest()


def standardize(x: TimeSeriesMatrix) -> TimeSeriesMatrix:
    """Z-score every channel (sample variance with 1/(T-1))."""
    v = x.values
    mean = v.mean(axis=1, keepdims=True)
    sd = v.std(axis=1, ddof=1, keepdims=True)
    zero = np.flatnonzero(sd[:, 0] == 0)
    if zero.size:
        raise InputError(f"zero-variance channel(s) {zero.tolist()}")
    return TimeSeriesMatrix((v - mean) / sd, x.labels)


def _parse_float(cell: str) -> float:
    return float(cell.strip())


def load_timeseries(path, format: str = "csv", manifest=None) -> TimeSeriesMatrix:
    """Read a time-series matrix from ``csv`` or ``raw`` (f64 + JSON manifest).

    Positions in error messages are 0-based ``(row, column)`` = (channel, time).
    For ``raw`` the manifest defaults to ``<path>.json``.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    if format == "csv":
        return _load_csv(path)
    if format in ("raw", "raw-f64"):
        return _load_raw(path, Path(manifest) if manifest else path.with_name(path.name + ".json"))
    raise InputError(f"unknown time-series format {format!r}")


def _load_csv(path: Path) -> TimeSeriesMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    labels = None
    try:
        [_parse_float(c) for c in rows[0]]
    except ValueError:
        labels = [c.strip() for c in rows[0]]
        rows = rows[1:]
    width = len(rows[0]) if rows else 0
    data = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise InputError(f"{path}: row {r} has {len(row)} columns, expected {width}")
        for c, cell in enumerate(row):
            try:
                data[r, c] = _parse_float(cell)
            except ValueError:
                raise InputError(f"{path}: cannot parse {cell!r} at (row {r}, column {c})") from None
    if labels is not None and len(labels) != data.shape[0]:
        raise InputError(f"{path}: header has {len(labels)} labels for {data.shape[0]} channel rows")
    try:
        return TimeSeriesMatrix(data, labels)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_raw(path: Path, manifest: Path) -> TimeSeriesMatrix:
    if not manifest.exists():
        raise InputError(f"missing manifest {manifest}")
    try:
        meta = json.loads(manifest.read_text(encoding="utf-8"))
        c, t = int(meta["channels"]), int(meta["timepoints"])
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{manifest}: invalid manifest ({exc})") from None
    flat = np.fromfile(path, dtype="<f8")
    if flat.size != c * t:
        raise InputError(f"{path}: {flat.size} values, manifest declares {c}x{t}={c * t}")
    try:
        return TimeSeriesMatrix(flat.reshape(c, t), meta.get("labels") or None)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_raw(x: TimeSeriesMatrix, path) -> None:
    path = Path(path)
    x.values.astype("<f8").tofile(path)
    meta = {"channels": x.num_channels, "timepoints": x.num_timepoints}
    if x.labels:
        meta["labels"] = list(x.labels)
    path.with_name(path.name + ".json").write_text(json.dumps(meta), encoding="utf-8")


def write_csv(x: TimeSeriesMatrix, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if x.labels:
            w.writerow(x.labels)
        for row in x.values:
            w.writerow([repr(float(v)) for v in row])


# --------------------------------------------------------------------------
# configuration


class Estimator(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RENYI_EXACT = "renyi-exact"
    RENYI_RANDOMIZED = "renyi-randomized"


MEDIAN = "median"


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator choice and parameters.

    ``bandwidth`` is either a positive float (fixed kernel width) or
    ``"median"``. ``alpha`` drives the O-information estimators; ``ib_alpha``
    is the order used by :func:`hoinfo.renyi.batch_entropy`. ``standardize``
    of ``None`` means z-score before the Renyi estimators only.
    """

    estimator: Estimator = Estimator.GAUSSIAN
    alpha: float = 2.0
    ib_alpha: float = 1.01
    bandwidth: float | str = MEDIAN
    probes: int = 30
    master_seed: int = 0
    ridge: float = 1e-10
    standardize: bool | None = None
    kernel_cache_bytes: int = 512 * 2**20

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        for name in ("alpha", "ib_alpha"):
            a = float(getattr(self, name))
            if not a > 0 or a == 1 or not math.isfinite(a):
                raise InputError(f"{name} must be > 0 and != 1, got {a}")
        if self.estimator is Estimator.RENYI_RANDOMIZED:
            if float(self.alpha) != int(self.alpha) or self.alpha < 2:
                raise InputError(
                    f"renyi-randomized requires an integer order alpha >= 2, got {self.alpha}")
            object.__setattr__(self, "alpha", int(self.alpha))
        if isinstance(self.bandwidth, str):
            if self.bandwidth != MEDIAN:
                raise InputError(f"bandwidth must be a positive float or 'median', got {self.bandwidth!r}")
        elif not float(self.bandwidth) > 0:
            raise InputError(f"fixed bandwidth must be > 0, got {self.bandwidth}")
        if int(self.probes) < 1:
            raise InputError("probes must be >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise InputError("master_seed must fit in an unsigned 64-bit integer")
        if not float(self.ridge) >= 0:
            raise InputError("ridge must be nonnegative")

    @property
    def is_renyi(self) -> bool:
        return self.estimator is not Estimator.GAUSSIAN

    @property
    def should_standardize(self) -> bool:
        return self.is_renyi if self.standardize is None else bool(self.standardize)

    @property
    def tag(self) -> str:
        if self.estimator is Estimator.GAUSSIAN:
            return f"gaussian(ridge={self.ridge!r})"
        params = f"alpha={self.alpha!r},sigma={self.bandwidth!r}"
        if self.estimator is Estimator.RENYI_RANDOMIZED:
            params += f",probes={self.probes},seed={self.master_seed}"
        return f"{self.estimator.value}({params})"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["estimator"] = self.estimator.value
        return d

    def replace(self, **changes) -> "EstimatorConfig":
        return dataclasses.replace(self, **changes)


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class Defect:
    tuple: tuple[int, ...]
    message: str


@dataclass(frozen=True, eq=False)
class PairwiseMatrix:
    """Symmetric C x C mutual-information matrix, zero diagonal.

    Failed pairs hold NaN and are listed in ``defects``.
    """

    values: np.ndarray
    defects: tuple[Defect, ...] = ()
    estimator_tag: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError(f"pairwise matrix must be square, got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "defects", tuple(self.defects))

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]

    def nonzero_pairs(self) -> int:
        iu = np.triu_indices(self.num_channels, 1)
        u = self.values[iu]
        return int(np.count_nonzero(u[np.isfinite(u)]))


def write_matrix_csv(m: PairwiseMatrix, path, labels: Sequence[str] | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if labels:
            w.writerow(labels)
        for row in m.values:
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> PairwiseMatrix:
    return PairwiseMatrix(_load_csv(Path(path)).values)


class InteractionTensor:
    """Order-K symmetric O-information tensor stored as sorted unique combinations.

    Lookup accepts any permutation of a tuple. Entries that failed during
    estimation are absent and listed in ``defects``.
    """

    def __init__(self, order: int, num_channels: int, indices, values, estimator_tag: str = "",
                 defects: Sequence[Defect] = ()):
        if order < 2:
            raise InputError(f"order must be >= 2, got {order}")
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, order)
        vals = np.asarray(values, dtype=np.float64).reshape(-1)
        if idx.shape[0] != vals.shape[0]:
            raise InputError("indices and values differ in length")
        if idx.size:
            if np.any(np.diff(idx, axis=1) <= 0):
                raise InputError("tuple indices must be strictly increasing")
            if idx.min() < 0 or idx.max() >= num_channels:
                raise InputError("tuple index out of range")
        ranks = combinatorics.rank_array(idx, num_channels) if idx.size else np.zeros(0, np.int64)
        if ranks.size > 1 and np.any(np.diff(ranks) <= 0):
            perm = np.argsort(ranks, kind="stable")
            idx, vals, ranks = idx[perm], vals[perm], ranks[perm]
            if np.any(np.diff(ranks) == 0):
                raise InputError("duplicate tuple in tensor")
        for a in (idx, vals, ranks):
            a.flags.writeable = False
        self.order = int(order)
        self.num_channels = int(num_channels)
        self.indices = idx
        self.values = vals
        self.ranks = ranks
        self.estimator_tag = estimator_tag
        self.defects = tuple(defects)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def is_complete(self) -> bool:
        return len(self) == combinatorics.num_tuples(self.num_channels, self.order)

    def position(self, key: Sequence[int]) -> int | None:
        t = combinatorics.canonical(key, self.num_channels)
        if len(t) != self.order:
            raise InputError(f"expected a {self.order}-tuple, got {tuple(key)}")
        r = combinatorics.rank(t, self.num_channels)
        if self.is_complete:
            return r
        p = int(np.searchsorted(self.ranks, r))
        return p if p < len(self) and self.ranks[p] == r else None

    def __getitem__(self, key: Sequence[int]) -> float:
        p = self.position(key)
        if p is None:
            raise KeyError(tuple(key))
        return float(self.values[p])

    def __contains__(self, key) -> bool:
        try:
            return self.position(key) is not None
        except InputError:
            return False

    def items(self) -> Iterator[tuple[tuple[int, ...], float]]:
        for row, v in zip(self.indices.tolist(), self.values.tolist()):
            yield tuple(row), v

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionTensor):
            return NotImplemented
        return (self.order == other.order and self.num_channels == other.num_channels
                and self.estimator_tag == other.estimator_tag
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values.view(np.uint64), other.values.view(np.uint64)))

    def __repr__(self) -> str:
        return (f"InteractionTensor(order={self.order}, num_channels={self.num_channels}, "
                f"entries={len(self)}, tag={self.estimator_tag!r})")

    def dense_slab(self, first: int) -> np.ndarray:
        """All entries with leading index ``first`` as a C^(K-1) array.

        Repeated-index positions are 0, defective tuples NaN.
        """
        c, k = self.num_channels, self.order
        grid = np.indices((c,) * (k - 1)).reshape(k - 1, -1).T
        full = np.column_stack([np.full(grid.shape[0], first), grid])
        full.sort(axis=1)
        distinct = np.all(np.diff(full, axis=1) > 0, axis=1)
        out = np.zeros(grid.shape[0])
        if distinct.any():
            r = combinatorics.rank_array(full[distinct], c)
            if self.is_complete:
                out[distinct] = self.values[r]
            else:
                p = np.minimum(np.searchsorted(self.ranks, r), max(len(self) - 1, 0))
                found = (self.ranks[p] == r) if len(self) else np.zeros(r.shape, bool)
                vals = np.where(found, self.values[p] if len(self) else 0.0, np.nan)
                out[distinct] = vals
        return out.reshape((c,) * (k - 1))

    def to_dense(self, max_entries: int = 50_000_000) -> np.ndarray:
        size = self.num_channels ** self.order
        if size > max_entries:
            raise InputError(f"dense tensor of {size} entries exceeds {max_entries}; use write_dense_npy")
        return np.stack([self.dense_slab(i) for i in range(self.num_channels)])

    def write_dense_npy(self, path) -> None:
        """Stream the dense C^K tensor to a ``.npy`` file one leading slab at a time."""
        shape = (self.num_channels,) * self.order
        with open(path, "wb") as fh:
            np.lib.format.write_array_header_2_0(
                fh, {"descr": "<f8", "fortran_order": False, "shape": shape})
            for i in range(self.num_channels):
                fh.write(self.dense_slab(i).astype("<f8").tobytes())


def write_tensor(t: InteractionTensor, path) -> None:
    tag = t.estimator_tag.encode("utf-8")
    if len(tag) > 0xFFFF:
        raise InputError("estimator tag too long for HOIT")
    rec = np.dtype([("idx", "<u4", (t.order,)), ("val", "<f8")])
    body = np.empty(len(t), dtype=rec)
    body["idx"] = t.indices
    body["val"] = t.values
    with open(path, "wb") as fh:
        fh.write(_HOIT_HEADER.pack(HOIT_MAGIC, HOIT_VERSION, t.order, t.num_channels, len(t)))
        fh.write(struct.pack("<H", len(tag)))
        fh.write(tag)
        fh.write(body.tobytes())


def read_tensor(path) -> InteractionTensor:
    data = Path(path).read_bytes()
    if len(data) < _HOIT_HEADER.size + 2:
        raise InputError(f"{path}: truncated HOIT header")
    magic, version, order, channels, count = _HOIT_HEADER.unpack_from(data, 0)
    if magic != HOIT_MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}")
    if version != HOIT_VERSION:
        raise InputError(f"{path}: unsupported HOIT version {version}")
    off = _HOIT_HEADER.size
    (taglen,) = struct.unpack_from("<H", data, off)
    off += 2
    tag = data[off:off + taglen].decode("utf-8")
    off += taglen
    rec = np.dtype([("idx", "<u4", (order,)), ("val", "<f8")])
    if len(data) - off != count * rec.itemsize:
        raise InputError(f"{path}: expected {count} entries, found {(len(data) - off) / rec.itemsize}")
    body = np.frombuffer(data, dtype=rec, count=count, offset=off)
    return InteractionTensor(order, channels, body["idx"].astype(np.int64), body["val"].copy(), tag)


def write_manifest(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
                          encoding="utf-8")


def _json_default(o):
    if isinstance(o, enum.Enum):
        return o.value
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
