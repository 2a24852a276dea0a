"""Probability models bridging learned parameters to the range coder.

Two model families cover every coded stream:

* discretized Gaussians with per-element mean/scale coming from a context
  network, evaluated over an integer support with folded tails;
* a self-describing factorized prior (per-channel discretized Gaussian
  whose raw parameters ship in the container header), used for hyperpriors
  and for first-feature rows that have no causal context.

`freeze_cdf` turns any pmf into the fixed-point cumulative table the coder
consumes: total mass exactly 2^precision, every bin at least 1, largest
remainder rounding, fully deterministic. Rate evaluation is differentiable
with respect to (mean, scale); the analytic gradients here are what the
trainer consumes and are finite-difference-checked in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ShapeError
from .rangecoder import IntegerCdf

SIGMA_MIN = 1e-2
SIGMA_MAX = 4096.0
PRECISION = 16
LN2 = float(np.log(2.0))
_MIN_P = 2.0**-PRECISION  # matches the minimum mass of a frozen CDF


def dg_pmf(mu, sigma, support) -> np.ndarray:
    """Discretized Gaussian pmf over integer bins [lo, hi], tails folded.

    Interior bins get P(k) = Phi((k+1/2-mu)/sigma) - Phi((k-1/2-mu)/sigma);
    the boundary bins absorb the left/right tails so the pmf sums to one.
    mu and sigma broadcast; the support axis is appended last.
    """
    lo, hi = int(support[0]), int(support[1])
    if lo > hi:
        raise ShapeError(f"support [{lo}, {hi}] is empty")
    mu = np.asarray(mu, dtype=np.float64)[..., None]
    sigma = np.maximum(np.asarray(sigma, dtype=np.float64), SIGMA_MIN)[..., None]
    k = np.arange(lo, hi + 1, dtype=np.float64)
    upper = ndtr((k + 0.5 - mu) / sigma)
    lower = ndtr((k - 0.5 - mu) / sigma)
    pmf = upper - lower
    pmf[..., 0] = upper[..., 0]
    pmf[..., -1] = 1.0 - lower[..., -1]
    return pmf


def freeze_cdf(pmf, precision: int = PRECISION) -> IntegerCdf:
    """Freeze one pmf into an IntegerCdf."""
    cum = freeze_cdf_rows(np.asarray(pmf, dtype=np.float64)[None, :], precision)[0]
    return IntegerCdf(cum, precision)


def freeze_cdf_rows(pmf_rows: np.ndarray, precision: int = PRECISION) -> np.ndarray:
    """Vectorized freeze of (n, A) pmf rows into (n, A+1) uint32 cumulatives.

    Proportional scaling to total 2^precision with largest-remainder
    correction (ties broken toward the lower index), then a minimum mass of
    one per bin, compensated from the largest bins. Deterministic.
    """
    pmf_rows = np.asarray(pmf_rows, dtype=np.float64)
    if pmf_rows.ndim != 2:
        raise ShapeError("expected a (rows, alphabet) pmf matrix")
    n, a = pmf_rows.shape
    total = 1 << precision
    if a > total:
        raise ShapeError(f"alphabet of {a} exceeds 2^{precision}")
    raw = np.clip(pmf_rows, 0.0, None) * total
    masses = np.floor(raw).astype(np.int64)
    rem = raw - masses

    deficit = total - masses.sum(axis=1)
    # stable sort on -rem: ties resolve to the lower index
    order = np.argsort(-rem, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(a)[None, :].repeat(n, 0), axis=1)
    masses += ranks < np.maximum(deficit, 0)[:, None]
    # a slightly over-unity pmf can overshoot; pull back from the largest bins
    for row in np.flatnonzero(deficit < 0):
        _drain(masses[row], -int(deficit[row]))

    zero_fix = (masses == 0).sum(axis=1)
    masses[masses == 0] = 1
    for row in np.flatnonzero(zero_fix):
        _drain(masses[row], int(zero_fix[row]))

    out = np.zeros((n, a + 1), dtype=np.uint32)
    out[:, 1:] = np.cumsum(masses, axis=1)
    return out


def _drain(mass_row: np.ndarray, amount: int):
    """Remove `amount` units from the largest bins, keeping every bin >= 1."""
    while amount > 0:
        idx = int(np.argmax(mass_row))
        take = min(amount, int(mass_row[idx]) - 1)
        if take <= 0:
            raise ShapeError("cannot redistribute pmf mass with min-1 bins")
        mass_row[idx] -= take
        amount -= take


def rate_bits(symbols, pmf_rows) -> float:
    """Ideal code length sum(-log2 p) for symbols indexed into pmf rows.

    Probabilities are clamped at 2^-precision, matching what a frozen CDF
    can actually assign to a symbol.
    """
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
    pmf_rows = np.asarray(pmf_rows, dtype=np.float64)
    if pmf_rows.ndim == 1:
        pmf_rows = np.broadcast_to(pmf_rows, (symbols.shape[0], pmf_rows.shape[0]))
    p = pmf_rows[np.arange(symbols.shape[0]), symbols]
    return float(-np.log2(np.maximum(p, _MIN_P)).sum())


def frozen_rate_bits(symbols, cdf_rows, row_index=None) -> float:
    """Exact information content under frozen integer CDFs.

    This is what the range coder actually achieves (up to a bounded
    truncation plus flush slack), so it is the estimator used for rate
    accounting of coded sections.
    """
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
    cdf_rows = np.asarray(cdf_rows, dtype=np.uint32)
    if cdf_rows.ndim == 1:
        cdf_rows = cdf_rows[None, :]
    n = symbols.shape[0]
    if row_index is None:
        rows = np.zeros(n, dtype=np.int64) if cdf_rows.shape[0] == 1 else np.arange(n)
    else:
        rows = np.asarray(row_index, dtype=np.int64)
    cum = cdf_rows.astype(np.int64)
    mass = cum[rows, symbols + 1] - cum[rows, symbols]
    precision_total = cum[0, -1]
    return float(-np.log2(mass / precision_total).sum())


def noisy_rate_bits(x, mu, sigma) -> float:
    """Training surrogate: -log2 of the unit-bin Gaussian mass at x.

    For integer x this coincides with the interior discretized-Gaussian
    bins; for noise-perturbed x it is the standard continuous relaxation.
    """
    bits, _, _, _ = noisy_rate_bits_grad(x, mu, sigma)
    return bits


def noisy_rate_bits_grad(x, mu, sigma):
    """Value and analytic gradients of the rate surrogate.

    Returns (total_bits, d_mu, d_sigma, d_x) where the gradients are
    elementwise arrays broadcast to the common shape. sigma is clamped at
    SIGMA_MIN; clamped entries get zero sigma-gradient.
    """
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sigma_in = np.asarray(sigma, dtype=np.float64)
    active = sigma_in > SIGMA_MIN
    sig = np.maximum(sigma_in, SIGMA_MIN)

    u = (x + 0.5 - mu) / sig
    v = (x - 0.5 - mu) / sig
    p = np.maximum(ndtr(u) - ndtr(v), 1e-300)
    bits = float(np.sum(-np.log2(p)))

    phi_u = np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
    phi_v = np.exp(-0.5 * v * v) / np.sqrt(2.0 * np.pi)
    denom = p * LN2 * sig
    d_mu = (phi_u - phi_v) / denom
    d_sigma = np.where(active, (u * phi_u - v * phi_v) / denom, 0.0)
    d_x = (phi_v - phi_u) / denom
    shape = np.broadcast_shapes(x.shape, mu.shape, sigma_in.shape)
    return (
        bits,
        np.broadcast_to(d_mu, shape).copy(),
        np.broadcast_to(d_sigma, shape).copy(),
        np.broadcast_to(d_x, shape).copy(),
    )


@dataclass
class FactorizedPrior:
    """Per-channel discretized Gaussian whose parameters ship in the header.

    Self-describing: a decoder rebuilds the exact coding distribution from
    (mus, sigmas, support) alone, with no learned network in the loop.
    """

    mus: np.ndarray  # (channels,)
    sigmas: np.ndarray  # (channels,)
    support: tuple

    def __post_init__(self):
        self.mus = np.asarray(self.mus, dtype=np.float64)
        self.sigmas = np.maximum(np.asarray(self.sigmas, dtype=np.float64), SIGMA_MIN)
        if self.mus.shape != self.sigmas.shape or self.mus.ndim != 1:
            raise ShapeError("prior needs matching 1D mu/sigma")

    @property
    def channels(self) -> int:
        return self.mus.shape[0]

    def pmf_rows(self) -> np.ndarray:
        return dg_pmf(self.mus, self.sigmas, self.support)

    def cdf_rows(self, precision: int = PRECISION) -> np.ndarray:
        return freeze_cdf_rows(self.pmf_rows(), precision)


def build_cdf_rows(mu, sigma, support, precision: int = PRECISION) -> np.ndarray:
    """dg_pmf + freeze for flat (n,) mean/scale arrays; the coder fast path."""
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    sigma = np.asarray(sigma, dtype=np.float64).reshape(-1)
    pmf = dg_pmf(mu, sigma, support)
    return freeze_cdf_rows(pmf, precision)
