# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled range-coder core; bit-exact twin of _pyimpl.

The 65th bit of the low register lives in an explicit carry flag here
(Python ints are unbounded, C integers wrap); every emitted byte matches
the pure backend exactly.
"""

from cpython.bytes cimport PyBytes_FromStringAndSize
from cpython.mem cimport PyMem_Free, PyMem_Malloc, PyMem_Realloc
from libc.stdint cimport int64_t, uint8_t, uint32_t, uint64_t

import numpy as np

from ..errors import SymbolRangeError, TruncatedError

cdef uint64_t MASK64 = <uint64_t>0xFFFFFFFFFFFFFFFF
cdef uint64_t TOP = (<uint64_t>1) << 48
cdef uint64_t THRESH = <uint64_t>0xFF00000000000000
cdef int TOTAL_BITS = 16
FLUSH_BYTES = 9


def _normalize(symbols, cdfs, row_index, int need_symbols):
    cdfs = np.ascontiguousarray(cdfs, dtype=np.uint32)
    if cdfs.ndim == 1:
        cdfs = cdfs[None, :]
    if cdfs.ndim != 2 or cdfs.shape[1] < 2:
        raise SymbolRangeError("CDF table must be (rows, alphabet+1)")
    if need_symbols:
        symbols = np.ascontiguousarray(symbols, dtype=np.int64).reshape(-1)
        n = symbols.shape[0]
    else:
        n = symbols  # symbol count for decoding
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
    return symbols, cdfs, rows


cdef class RangeEncoder:
    cdef uint64_t _low
    cdef uint64_t _range
    cdef int _carry
    cdef unsigned int _cache
    cdef uint64_t _cache_size
    cdef uint8_t* _buf
    cdef size_t _len
    cdef size_t _cap
    cdef bint _done

    def __cinit__(self):
        self._low = 0
        self._range = MASK64
        self._carry = 0
        self._cache = 0
        self._cache_size = 0
        self._cap = 4096
        self._len = 0
        self._buf = <uint8_t*>PyMem_Malloc(self._cap)
        if self._buf == NULL:
            raise MemoryError()
        self._done = False

    def __dealloc__(self):
        if self._buf != NULL:
            PyMem_Free(self._buf)

    cdef int _put(self, uint8_t b) except -1:
        if self._len == self._cap:
            self._cap *= 2
            self._buf = <uint8_t*>PyMem_Realloc(self._buf, self._cap)
            if self._buf == NULL:
                raise MemoryError()
        self._buf[self._len] = b
        self._len += 1
        return 0

    cdef int _shift_low(self) except -1:
        cdef uint64_t low = self._low
        cdef unsigned int carry, temp
        if self._carry or low < THRESH:
            carry = <unsigned int>self._carry
            temp = self._cache
            while self._cache_size:
                self._put(<uint8_t>((temp + carry) & 0xFF))
                temp = 0xFF
                self._cache_size -= 1
            self._cache = <unsigned int>((low >> 56) & 0xFF)
        self._cache_size += 1
        self._low = low << 8
        self._carry = 0
        return 0

    def encode(self, symbols, cdfs, row_index=None):
        if self._done:
            raise RuntimeError("encoder already finished")
        symbols, cdfs, rows = _normalize(symbols, cdfs, row_index, 1)
        cdef int64_t[::1] sym = symbols
        cdef uint32_t[:, ::1] tab = cdfs
        cdef int64_t[::1] ridx = rows
        cdef Py_ssize_t n = sym.shape[0]
        cdef Py_ssize_t alphabet = tab.shape[1] - 1
        cdef uint64_t low = self._low
        cdef uint64_t rng = self._range
        cdef int carry = self._carry
        cdef uint64_t r, add
        cdef uint64_t cum_lo, cum_hi
        cdef int64_t s
        cdef Py_ssize_t i, row
        for i in range(n):
            s = sym[i]
            if s < 0 or s >= alphabet:
                raise SymbolRangeError(
                    f"symbol {s} outside alphabet of {alphabet}"
                )
            row = ridx[i]
            cum_lo = tab[row, s]
            cum_hi = tab[row, s + 1]
            r = rng >> TOTAL_BITS
            add = cum_lo * r
            low = low + add
            if low < add:
                carry = 1
            rng = (cum_hi - cum_lo) * r
            while rng < TOP:
                self._low = low
                self._carry = carry
                self._shift_low()
                low = self._low
                carry = self._carry
                rng = rng << 8
        self._low = low
        self._range = rng
        self._carry = carry

    def tell(self):
        return self._len

    def finish(self):
        if not self._done:
            for _ in range(FLUSH_BYTES):
                self._shift_low()
            self._done = True
        return PyBytes_FromStringAndSize(<char*>self._buf, self._len)


cdef class RangeDecoder:
    cdef uint64_t _code
    cdef uint64_t _range
    cdef bytes _data
    cdef const uint8_t* _ptr
    cdef Py_ssize_t _size
    cdef Py_ssize_t _pos

    def __init__(self, data):
        self._data = bytes(data)
        self._ptr = <const uint8_t*><const char*>self._data
        self._size = len(self._data)
        self._pos = 0
        self._range = MASK64
        cdef uint64_t code = 0
        cdef int i
        for i in range(8):
            code = (code << 8) | self._next_byte()
        self._code = code

    cdef uint64_t _next_byte(self):
        cdef uint64_t b = 0
        if self._pos < self._size:
            b = self._ptr[self._pos]
        self._pos += 1
        return b

    def exhausted(self):
        return self._pos > self._size + 8

    def decode(self, n, cdfs, row_index=None):
        _, cdfs, rows = _normalize(int(n), cdfs, row_index, 0)
        out = np.empty(int(n), dtype=np.int64)
        cdef uint32_t[:, ::1] tab = cdfs
        cdef int64_t[::1] ridx = rows
        cdef int64_t[::1] res = out
        cdef Py_ssize_t count = int(n)
        cdef uint64_t code = self._code
        cdef uint64_t rng = self._range
        cdef uint64_t r, val, cum_lo, cum_hi
        cdef Py_ssize_t i, row, lo, hi, mid
        cdef Py_ssize_t last = tab.shape[1] - 1
        for i in range(count):
            row = ridx[i]
            r = rng >> TOTAL_BITS
            val = code / r
            if val > 0xFFFF:
                val = 0xFFFF
            lo = 0
            hi = last
            while hi - lo > 1:
                mid = (lo + hi) >> 1
                if tab[row, mid] <= val:
                    lo = mid
                else:
                    hi = mid
            cum_lo = tab[row, lo]
            cum_hi = tab[row, lo + 1]
            code = code - cum_lo * r
            rng = (cum_hi - cum_lo) * r
            while rng < TOP:
                code = (code << 8) | self._next_byte()
                rng = rng << 8
            res[i] = lo
        self._code = code
        self._range = rng
        return out
