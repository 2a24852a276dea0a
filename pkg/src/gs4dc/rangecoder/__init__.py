"""Bit-exact range coding over frozen integer CDF tables.

The hot symbol loop lives in a compiled Cython core when available; a pure
Python twin with identical byte output is selected otherwise. BACKEND
records which one is active. Both expose streaming RangeEncoder /
RangeDecoder classes working on (rows, alphabet+1) uint32 CDF matrices with
total mass 2^16.

IntegerCdf is the frozen fixed-point distribution the coder consumes:
cumulative[0] == 0, strictly increasing, cumulative[-1] == 2^precision,
which guarantees every symbol at least one unit of mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SymbolRangeError
from . import _pyimpl

PRECISION = 16

try:  # compiled core is optional; the pure backend is always present
    from . import _core

    RangeEncoder = _core.RangeEncoder
    RangeDecoder = _core.RangeDecoder
    BACKEND = "cython"
except ImportError:  # pragma: no cover - exercised only without the extension
    RangeEncoder = _pyimpl.RangeEncoder
    RangeDecoder = _pyimpl.RangeDecoder
    BACKEND = "python"

PyRangeEncoder = _pyimpl.RangeEncoder
PyRangeDecoder = _pyimpl.RangeDecoder


@dataclass(frozen=True)
class IntegerCdf:
    cumulative: np.ndarray  # uint32, length alphabet+1
    precision: int = PRECISION

    def __post_init__(self):
        cum = np.asarray(self.cumulative, dtype=np.uint32)
        object.__setattr__(self, "cumulative", cum)
        if cum.ndim != 1 or cum.shape[0] < 2:
            raise SymbolRangeError("cumulative table needs at least one symbol")
        if cum[0] != 0 or cum[-1] != (1 << self.precision):
            raise SymbolRangeError("cumulative endpoints must be 0 and 2^precision")
        if np.any(np.diff(cum.astype(np.int64)) <= 0):
            raise SymbolRangeError("cumulative table must be strictly increasing")

    @property
    def alphabet_size(self) -> int:
        return self.cumulative.shape[0] - 1


def encode_symbols(symbols, cdf_provider) -> bytes:
    """Encode a symbol sequence, asking cdf_provider(i) for each step's CDF.

    ``cdf_provider`` may also be a single IntegerCdf (shared by all
    symbols) or a sequence of IntegerCdf, one per symbol. Providers are
    queried strictly in stream order, which is what lets contextual coders
    condition each step on previously coded content.
    """
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
    enc = RangeEncoder()
    for i, cdf in _iter_cdfs(cdf_provider, symbols.shape[0]):
        enc.encode(symbols[i : i + 1], cdf.cumulative[None, :])
    return enc.finish()


def decode_symbols(data: bytes, cdf_provider, n: int) -> np.ndarray:
    """Inverse of encode_symbols for the identical CDF sequence."""
    dec = RangeDecoder(data)
    out = np.empty(n, dtype=np.int64)
    for i, cdf in _iter_cdfs(cdf_provider, n):
        out[i] = dec.decode(1, cdf.cumulative[None, :])[0]
    return out


def _iter_cdfs(cdf_provider, n):
    if isinstance(cdf_provider, IntegerCdf):
        for i in range(n):
            yield i, cdf_provider
    elif callable(cdf_provider):
        for i in range(n):
            yield i, cdf_provider(i)
    else:
        cdfs = list(cdf_provider)
        if len(cdfs) != n:
            raise SymbolRangeError("need one CDF per symbol")
        for i in range(n):
            yield i, cdfs[i]
