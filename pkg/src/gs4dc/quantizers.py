"""Scalar quantization: per-column min-max fixed point and unit-step rounding.

Min-max quantization maps each column affinely onto [0, 2^bits - 1] and is
used for Gaussian attributes (16-bit positions, 8-bit scale/rotation/opacity)
and the vector-quantization codebook. Voxel features use a unit integer step
after division by a per-plane step size; training smooths the rounding with
additive uniform noise, inference rounds half-to-even.

All randomness flows through explicit seeded generators; there is no global
RNG anywhere in the codec.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def make_rng(seed: int) -> np.random.Generator:
    """Explicit 64-bit seeded PRNG; callers own their streams."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class MinMaxQuant:
    bits: int
    mins: np.ndarray  # (cols,)
    maxs: np.ndarray  # (cols,)

    def __post_init__(self):
        if not 1 <= self.bits <= 16:
            raise ShapeError(f"bits must be in [1, 16], got {self.bits}")
        if np.any(self.mins > self.maxs):
            raise ShapeError("min > max in quantizer")


@dataclass
class QuantizedTensor:
    symbols: np.ndarray  # integer dtype, same shape as the source
    quant: MinMaxQuant


def _as_columns(values):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        return values[:, None], True
    if values.ndim == 2:
        return values, False
    raise ShapeError("min-max quantization expects a 1D or 2D array")


def quantize_minmax(values, bits: int) -> QuantizedTensor:
    """Per-column affine map to [0, 2^bits - 1], rounded half-to-even.

    Constant columns record min == max and quantize to all-zero symbols,
    which dequantize exactly.
    """
    cols, squeeze = _as_columns(values)
    if not np.all(np.isfinite(cols)):
        raise ShapeError("non-finite values cannot be min-max quantized")
    mins = cols.min(axis=0) if cols.size else np.zeros(cols.shape[1])
    maxs = cols.max(axis=0) if cols.size else np.zeros(cols.shape[1])
    levels = (1 << bits) - 1
    span = maxs - mins
    safe_span = np.where(span > 0.0, span, 1.0)
    sym = np.rint((cols - mins) / safe_span * levels)
    sym = np.clip(sym, 0, levels)
    dtype = np.uint8 if bits <= 8 else np.uint16
    symbols = sym.astype(dtype)
    if squeeze:
        symbols = symbols[:, 0]
    return QuantizedTensor(symbols, MinMaxQuant(bits, mins, maxs))


def dequantize_minmax(qt: QuantizedTensor) -> np.ndarray:
    """Affine inverse; quantize(dequantize(q)) is a fixed point."""
    sym = np.asarray(qt.symbols, dtype=np.float64)
    squeeze = sym.ndim == 1
    if squeeze:
        sym = sym[:, None]
    levels = (1 << qt.quant.bits) - 1
    span = qt.quant.maxs - qt.quant.mins
    out = qt.quant.mins + sym / levels * span
    return out[:, 0] if squeeze else out


def round_quantize(x) -> np.ndarray:
    """Inference path: round half-to-even (2.5 -> 2, 3.5 -> 4)."""
    return np.rint(np.asarray(x, dtype=np.float64))


def noise_quantize(x, rng: np.random.Generator) -> np.ndarray:
    """Training path: add i.i.d. uniform noise on the open interval (-1/2, 1/2)."""
    x = np.asarray(x, dtype=np.float64)
    u = rng.random(x.shape)
    # rng.random() can return exactly 0.0; remap so the deviation stays open.
    if u.size:
        u[u == 0.0] = 0.5
    return x + (u - 0.5)
