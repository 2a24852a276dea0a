"""Pure-Python range coder backend.

Byte-wise carry-propagating range coder with a 64-bit low register (plus a
one-bit carry window) and a 64-bit range register, renormalized a byte at a
time whenever range drops below 2^48. All cumulative tables are frozen
integer CDFs with total mass 2^16, so the interval split is

    r     = range >> 16
    low  += cdf[s] * r
    range = (cdf[s+1] - cdf[s]) * r

Truncation loss per symbol is bounded by 2^-32 relative, so measured stream
lengths track the ideal cross-entropy to well under 0.01%. Output bytes are
a pure function of (symbols, CDF sequence); the compiled backend reproduces
them bit for bit.
"""

from __future__ import annotations

import numpy as np

from ..errors import SymbolRangeError, TruncatedError

MASK64 = (1 << 64) - 1
TOP = 1 << 48
TOTAL_BITS = 16
TOTAL = 1 << TOTAL_BITS
FLUSH_BYTES = 9  # one cache byte + eight bytes of low


def _check_tables(cdfs):
    cdfs = np.ascontiguousarray(cdfs, dtype=np.uint32)
    if cdfs.ndim == 1:
        cdfs = cdfs[None, :]
    if cdfs.ndim != 2 or cdfs.shape[1] < 2:
        raise SymbolRangeError("CDF table must be (rows, alphabet+1)")
    return cdfs


class RangeEncoder:
    """Streaming encoder; encode() may be called repeatedly, then finish()."""

    def __init__(self):
        self._low = 0
        self._range = MASK64
        self._cache = 0
        self._cache_size = 0
        self._out = bytearray()
        self._done = False

    def _shift_low(self):
        low = self._low
        if low < 0xFF00000000000000 or low > MASK64:
            carry = low >> 64
            temp = self._cache
            while self._cache_size:
                self._out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self._cache_size -= 1
            self._cache = (low >> 56) & 0xFF
        self._cache_size += 1
        self._low = (low << 8) & MASK64

    def encode(self, symbols, cdfs, row_index=None):
        """Encode int symbols against rows of a frozen CDF matrix.

        ``cdfs`` is (m, A+1) uint32 with cdfs[:, 0] == 0 and
        cdfs[:, -1] == 2^16. ``row_index`` maps each symbol to a row;
        omit it when m == 1 (single shared row) or m == len(symbols).
        """
        if self._done:
            raise RuntimeError("encoder already finished")
        symbols = np.ascontiguousarray(symbols, dtype=np.int64).reshape(-1)
        cdfs = _check_tables(cdfs)
        n = symbols.shape[0]
        if row_index is None:
            if cdfs.shape[0] == 1:
                rows = np.zeros(n, dtype=np.int64)
            elif cdfs.shape[0] == n:
                rows = np.arange(n, dtype=np.int64)
            else:
                raise SymbolRangeError("row_index required for ragged CDF matrix")
        else:
            rows = np.ascontiguousarray(row_index, dtype=np.int64).reshape(-1)
            if rows.shape[0] != n:
                raise SymbolRangeError("row_index length mismatch")
        alphabet = cdfs.shape[1] - 1

        low = self._low
        rng = self._range
        for i in range(n):
            s = symbols[i]
            if s < 0 or s >= alphabet:
                raise SymbolRangeError(f"symbol {s} outside alphabet of {alphabet}")
            row = cdfs[rows[i]]
            cum_lo = int(row[s])
            cum_hi = int(row[s + 1])
            r = rng >> TOTAL_BITS
            low += cum_lo * r
            rng = (cum_hi - cum_lo) * r
            while rng < TOP:
                self._low = low
                self._shift_low()
                low = self._low
                rng = (rng << 8) & MASK64
        self._low = low
        self._range = rng

    def tell(self) -> int:
        """Bytes emitted so far (pending carry bytes not counted)."""
        return len(self._out)

    def finish(self) -> bytes:
        if not self._done:
            for _ in range(FLUSH_BYTES):
                self._shift_low()
            self._done = True
        return bytes(self._out)


class RangeDecoder:
    """Streaming decoder; decode() calls must mirror the encode() sequence."""

    def __init__(self, data: bytes):
        self._data = bytes(data)
        self._pos = 0
        self._range = MASK64
        code = 0
        for _ in range(8):
            code = (code << 8) | self._next_byte()
        self._code = code

    def _next_byte(self) -> int:
        if self._pos < len(self._data):
            b = self._data[self._pos]
            self._pos += 1
            return b
        self._pos += 1
        return 0

    def exhausted(self) -> bool:
        """True once reads have gone past the physical end of the stream."""
        return self._pos > len(self._data) + 8

    def decode(self, n: int, cdfs, row_index=None) -> np.ndarray:
        cdfs = _check_tables(cdfs)
        if row_index is None:
            if cdfs.shape[0] == 1:
                rows = np.zeros(n, dtype=np.int64)
            elif cdfs.shape[0] == n:
                rows = np.arange(n, dtype=np.int64)
            else:
                raise SymbolRangeError("row_index required for ragged CDF matrix")
        else:
            rows = np.ascontiguousarray(row_index, dtype=np.int64).reshape(-1)
            if rows.shape[0] != n:
                raise SymbolRangeError("row_index length mismatch")

        out = np.empty(n, dtype=np.int64)
        code = self._code
        rng = self._range
        for i in range(n):
            row = cdfs[rows[i]]
            r = rng >> TOTAL_BITS
            val = code // r
            if val > TOTAL - 1:
                val = TOTAL - 1
            # highest s with row[s] <= val
            lo, hi = 0, row.shape[0] - 1
            while hi - lo > 1:
                mid = (lo + hi) >> 1
                if row[mid] <= val:
                    lo = mid
                else:
                    hi = mid
            s = lo
            cum_lo = int(row[s])
            cum_hi = int(row[s + 1])
            code -= cum_lo * r
            rng = (cum_hi - cum_lo) * r
            while rng < TOP:
                code = ((code << 8) | self._next_byte()) & MASK64
                rng = (rng << 8) & MASK64
            out[i] = s
        self._code = code
        self._range = rng
        return out
