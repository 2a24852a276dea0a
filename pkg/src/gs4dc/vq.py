"""Vector quantization of SH vectors plus run-length coding of the indices.

k-means is seeded and fully deterministic: k-means++ init from an explicit
generator, Lloyd updates accumulated per cluster in point-index order, ties
in the assignment step broken toward the lowest codeword index.

The index stream byte layout (documented bit-exactly in docs/formats.md):

    byte 0: mode, 0 = run-length pairs, 1 = raw values
    mode 0: repeated (value varint, run-length varint) pairs
    mode 1: one varint per index

whichever encoding is smaller wins; ties go to run-length mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ShapeError, TruncatedError
from .quantizers import make_rng

MODE_RLE = 0
MODE_RAW = 1


@dataclass
class Codebook:
    entries: np.ndarray  # (K, D) float64
    objective: float = 0.0
    objective_trace: tuple = field(default=())

    @property
    def size(self):
        return self.entries.shape[0]

    @property
    def dim(self):
        return self.entries.shape[1]


def _squared_distances(x, centroids):
    # ||x - c||^2 expanded; clamp tiny negatives from cancellation
    d2 = (
        (x * x).sum(axis=1)[:, None]
        - 2.0 * (x @ centroids.T)
        + (centroids * centroids).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _plusplus_init(x, k, rng):
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = x[first]
    d2 = _squared_distances(x, centroids[:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            u = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), u))
            idx = min(idx, n - 1)
        centroids[j] = x[idx]
        d2 = np.minimum(d2, _squared_distances(x, centroids[j : j + 1])[:, 0])
    return centroids


def kmeans_fit(vectors, k: int, iters: int = 30, seed: int = 0, tol: float = 1e-6):
    """Lloyd's algorithm with k-means++ init.

    Returns (Codebook, assignments int32). The per-iteration objective is
    non-increasing; empty clusters are re-seeded to the farthest point.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("kmeans expects an (N, D) array")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ShapeError(f"need 1 <= K <= N, got K={k}, N={n}")
    rng = make_rng(seed)
    centroids = _plusplus_init(x, k, rng)

    trace = []
    assign = np.zeros(n, dtype=np.int32)
    prev_obj = np.inf
    for _ in range(iters):
        d2 = _squared_distances(x, centroids)
        assign = d2.argmin(axis=1).astype(np.int32)  # first minimum = lowest index
        obj = float(np.take_along_axis(d2, assign[:, None].astype(np.int64), 1).sum())
        trace.append(obj)

        counts = np.bincount(assign, minlength=k)
        sums = np.zeros((k, x.shape[1]))
        for dim in range(x.shape[1]):
            sums[:, dim] = np.bincount(assign, weights=x[:, dim], minlength=k)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]

        empties = np.flatnonzero(~nonempty)
        if empties.size:
            # hand each empty cluster the point currently farthest from its centroid
            per_point = np.take_along_axis(d2, assign[:, None].astype(np.int64), 1)[:, 0]
            order = np.argsort(-per_point, kind="stable")
            for slot, cluster in enumerate(empties):
                centroids[cluster] = x[order[slot % n]]

        if prev_obj - obj < tol * max(prev_obj, 1e-300) and not empties.size:
            break
        prev_obj = obj

    # final assignment against the last centroid update
    d2 = _squared_distances(x, centroids)
    assign = d2.argmin(axis=1).astype(np.int32)
    obj = float(np.take_along_axis(d2, assign[:, None].astype(np.int64), 1).sum())
    trace.append(obj)
    return Codebook(centroids, obj, tuple(trace)), assign


# ---------------------------------------------------------------------------
# run-length / raw index stream
# ---------------------------------------------------------------------------


def _write_varint(out: bytearray, value: int):
    if value < 0:
        raise ShapeError(f"varint cannot encode negative value {value}")
    while value > 0x7F:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    out.append(value)


def _read_varint(data: bytes, pos: int):
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise TruncatedError("varint ran past end of stream")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise FormatError("varint longer than 64 bits")


def _varint_len(value: int) -> int:
    length = 1
    while value > 0x7F:
        value >>= 7
        length += 1
    return length


def rle_encode(indices) -> bytes:
    """Encode an index stream; picks run-length or raw mode by coded size."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("index stream must be 1D")
    if idx.size and idx.min() < 0:
        raise ShapeError("indices must be non-negative")

    runs = []
    if idx.size:
        change = np.flatnonzero(np.diff(idx)) + 1
        starts = np.concatenate(([0], change))
        ends = np.concatenate((change, [idx.size]))
        runs = [(int(idx[s]), int(e - s)) for s, e in zip(starts, ends)]

    rle_size = sum(_varint_len(v) + _varint_len(r) for v, r in runs)
    raw_size = int(sum(_varint_len(int(v)) for v in idx))

    out = bytearray()
    if rle_size <= raw_size:
        out.append(MODE_RLE)
        for value, run in runs:
            _write_varint(out, value)
            _write_varint(out, run)
    else:
        out.append(MODE_RAW)
        for value in idx:
            _write_varint(out, int(value))
    return bytes(out)


def rle_decode(data: bytes, n: int) -> np.ndarray:
    """Exact inverse of rle_encode for a stream of n indices."""
    if len(data) < 1:
        raise TruncatedError("index stream missing mode byte")
    mode = data[0]
    pos = 1
    out = np.empty(n, dtype=np.int64)
    if mode == MODE_RLE:
        filled = 0
        while filled < n:
            value, pos = _read_varint(data, pos)
            run, pos = _read_varint(data, pos)
            if run == 0 or filled + run > n:
                raise FormatError(f"run of {run} overflows stream of {n}")
            out[filled : filled + run] = value
            filled += run
    elif mode == MODE_RAW:
        for i in range(n):
            out[i], pos = _read_varint(data, pos)
    else:
        raise FormatError(f"unknown index stream mode {mode}")
    if pos != len(data):
        raise FormatError("trailing bytes after index stream")
    return out
