"""Right-hand side of the truncated cluster-eating system

    dc_j/dt = sum_{k=1}^{N-j} a(j+k,k) c_{j+k} c_k  -  c_j sum_{k=1}^{N} a(j,k) c_k

for j = 1..N. The gain sum is empty for j = N (and so for N = 1).

Two evaluation paths are provided. :func:`eval_naive` is the O(N^2)
reference; :func:`eval_fast` handles separable kernels ``a = K w_j w_k`` in
O(N log N) by writing the gain as an autocorrelation of ``u_j = w_j c_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy import fft as sp_fft

from . import _eft
from .kernel import Kernel, ProductPower

__all__ = ["RhsOutput", "UnsupportedKernel", "eval_naive", "eval_fast", "evaluate", "make_rhs"]


class UnsupportedKernel(TypeError):
    pass


@dataclass(frozen=True, eq=False)
class RhsOutput:
    d: np.ndarray
    gain: np.ndarray | None = None
    loss: np.ndarray | None = None


@lru_cache(maxsize=16)
def _gain_pairs(n: int):
    """Flat indices of the pairs (j+k, k), grouped by j and ascending in k.

    Returns ``(lag, p, q)`` with 0-based row ``p = j+k-1``, column
    ``q = k-1`` and ``lag = j-1`` (the output slot).
    """
    if n < 2:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty, empty
    j = np.concatenate([np.full(n - lag, lag) for lag in range(1, n)])
    k = np.concatenate([np.arange(1, n - lag + 1) for lag in range(1, n)])
    return j - 1, j + k - 1, k - 1


def _ordered_sum(groups: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    # bincount adds values into their bins strictly in input order, so each
    # bin is accumulated with ascending k
    return np.bincount(groups, weights=values, minlength=n)[:n]


@njit(cache=True)
def _split(a):
    t = 134217729.0 * a  # 2^27 + 1
    hi = t - (t - a)
    return hi, a - hi


@njit(cache=True)
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True)
def _three_prod(a, x, y):
    """``a*x*y`` as ``hi + lo`` with an error of order eps^2."""
    m, em = _two_prod(a, x)
    h, eh = _two_prod(m, y)
    return h, eh + em * y


@njit(cache=True)
def _compensated_terms(table, c):
    """Gain, loss and their difference by Sum2 (Ogita-Rump-Oishi) over exact
    products, accumulated in ascending k for every j."""
    n = c.size
    d = np.empty(n)
    gain = np.empty(n)
    loss = np.empty(n)
    for j in range(n):
        s = 0.0
        comp = 0.0
        for k in range(n - j - 1):
            h, lo = _three_prod(table[j + k + 1, k], c[j + k + 1], c[k])
            t = s + h
            bb = t - s
            comp += ((s - (t - bb)) + (h - bb)) + lo
            s = t
        gain[j] = s + comp
        sl = 0.0
        compl = 0.0
        for k in range(n):
            h, lo = _three_prod(table[j, k], c[k], c[j])
            t = s - h
            bb = t - s
            comp += ((s - (t - bb)) + (-h - bb)) - lo
            s = t
            t = sl + h
            bb = t - sl
            compl += ((sl - (t - bb)) + (h - bb)) + lo
            sl = t
        d[j] = s + comp
        loss[j] = sl + compl
    return d, gain, loss


class _NaiveRhs:
    """Reference evaluator bound to one (kernel, N); tables built once.

    Sums are accumulated in ascending k. With ``compensated=True`` every
    product is formed exactly and gain minus loss goes through one
    compensated sum, so ``d`` is accurate to a few ulp even where gain and
    loss almost cancel.
    """

    def __init__(self, kernel: Kernel, n: int, compensated: bool = False):
        self.n = n
        self.compensated = compensated
        self.table = kernel.table(n)
        self.lag, self.p, self.q = _gain_pairs(n)
        self.a_pairs = self.table[self.p, self.q]
        self.rows = np.repeat(np.arange(n), n)

    def __call__(self, c: np.ndarray, decompose: bool = False) -> RhsOutput:
        n = self.n
        if self.compensated:
            d, gain, loss = _compensated_terms(self.table, np.ascontiguousarray(c, dtype=float))
        else:
            gain = _ordered_sum(self.lag, self.a_pairs * c[self.p] * c[self.q], n)
            phi = _ordered_sum(self.rows, (self.table * c[None, :]).ravel(), n)
            loss = c * phi
            d = gain - loss
        if decompose:
            return RhsOutput(d, gain, loss)
        return RhsOutput(d)


class _FastRhs:
    """Separable-kernel evaluator: gain_j = K * sum_k u_{j+k} u_k with u = w * c.

    The gain is a correlation, not a convolution: lag j pairs u_{k+j} with
    u_k. In Fourier space that is FFT(u) times the complex conjugate of
    FFT(u), the conjugate being the index reversal k -> -k. Both sequences
    are zero padded to a power of two L >= 2N so the circular lags never wrap
    onto the ones we read (0..N-1).

    A plain double FFT has an absolute error of order eps * |u|^2 on every
    lag, which swamps lags whose gain nearly cancels the loss. Instead u is
    split into a few integer chunks of ``bits`` bits each; each chunk
    correlation is small enough that the transform error stays below 1/2, so
    rounding recovers it exactly and the recombined gain is accurate to a few
    ulp.
    """

    def __init__(self, kernel: Kernel, n: int):
        if not (isinstance(kernel, ProductPower) and kernel.separable):
            raise UnsupportedKernel(f"fast path needs a separable kernel, got {type(kernel).__name__}")
        self.n = n
        self.K = float(kernel.K)
        self.w_hi, self.w_lo = kernel.weights_dd(n)
        self.size = 1 << max(1, int(np.ceil(np.log2(2 * n))))
        # chunk correlations must come back from the transform with an error
        # well below 1/2: N * 2^(2 bits) * (terms per order) * log2(L) * eps << 1
        headroom = np.log2(4 * n * np.log2(self.size)) + 6
        self.bits = int(min(20, (52 - headroom) // 2))
        if self.bits < 8:
            raise UnsupportedKernel(f"truncation N={n} too large for the exact fast path")
        self.chunks = int(np.ceil(64 / self.bits))

    def _split(self, x: np.ndarray):
        _, exp = np.frexp(float(np.max(np.abs(x))))
        y = np.ldexp(x, -int(exp))  # |y| < 1, exact
        parts = []
        for _ in range(self.chunks):
            y = np.ldexp(y, self.bits)
            q = np.trunc(y)
            y = y - q  # exact: fractional part of a float
            parts.append(q)
        return parts, int(exp)

    def _exact_autocorr(self, x: np.ndarray):
        """``sum_k x[k+lag] x[k]`` for lag = 0..N-1 as a double-double."""
        n = self.n
        if not np.any(x):
            return np.zeros(n), np.zeros(n)
        parts, exp = self._split(x)
        spectra = [sp_fft.rfft(q, n=self.size) for q in parts]
        m = self.chunks
        hi = np.zeros(n)
        lo = np.zeros(n)
        # smallest contributions first
        for order in range(2 * m - 2, -1, -1):
            prod = sum(spectra[a] * np.conj(spectra[order - a])
                       for a in range(max(0, order - m + 1), min(order, m - 1) + 1))
            exact = np.rint(sp_fft.irfft(prod, n=self.size)[:n])
            hi, err = _eft.two_sum(hi, np.ldexp(exact, 2 * exp - (order + 2) * self.bits))
            lo = lo + err
        return _eft.two_sum(hi, lo)

    def _cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``sum_k a[k+lag] b[k] + b[k+lag] a[k]``; only used for tiny b."""
        fa = sp_fft.rfft(a, n=self.size)
        fb = sp_fft.rfft(b, n=self.size)
        return sp_fft.irfft(2.0 * (fa * np.conj(fb)).real, n=self.size)[: self.n]

    def _pair_counts(self, mask: np.ndarray) -> np.ndarray:
        f = sp_fft.rfft(mask, n=self.size)
        return sp_fft.irfft(f * np.conj(f), n=self.size)[: self.n]

    def __call__(self, c: np.ndarray, decompose: bool = False) -> RhsOutput:
        n = self.n
        # u = w * c to double-double accuracy
        u_hi, u_lo = _eft.two_prod(self.w_hi, c)
        u_lo = u_lo + self.w_lo * c
        g_hi = np.zeros(n)
        g_lo = np.zeros(n)
        if n > 1:
            corr_hi, corr_lo = self._exact_autocorr(u_hi)
            corr_lo = corr_lo + self._cross(u_hi, u_lo)
            # lags without a single pair of nonzero factors get an exact zero
            live = self._pair_counts((c != 0).astype(float))[1:] >= 0.5
            g_hi[: n - 1] = np.where(live, corr_hi[1:], 0.0)
            g_lo[: n - 1] = np.where(live, corr_lo[1:], 0.0)
        terms = np.concatenate([u_hi, u_lo])
        s_hi = math.fsum(terms)
        s_lo = math.fsum(np.append(terms, -s_hi))
        l_hi, l_lo = _eft.two_prod(u_hi, s_hi)
        l_lo = l_lo + (u_hi * s_lo + u_lo * s_hi)
        d_hi, d_lo = _eft.two_sum(g_hi, -l_hi)
        d_lo = d_lo + (g_lo - l_lo)
        d, _ = _eft.dd_mul_d(d_hi, d_lo, self.K)
        if decompose:
            gain = _eft.dd_mul_d(g_hi, g_lo, self.K)[0]
            loss = _eft.dd_mul_d(l_hi, l_lo, self.K)[0]
            return RhsOutput(d, gain, loss)
        return RhsOutput(d)


@lru_cache(maxsize=8)
def _naive_for(kernel: Kernel, n: int, compensated: bool) -> _NaiveRhs:
    return _NaiveRhs(kernel, n, compensated)


@lru_cache(maxsize=8)
def _fast_for(kernel: Kernel, n: int) -> _FastRhs:
    return _FastRhs(kernel, n)


def _as_array(state) -> np.ndarray:
    c = getattr(state, "c", state)
    return np.asarray(c, dtype=float)


def eval_naive(kernel: Kernel, state, decompose: bool = False, compensated: bool = False) -> RhsOutput:
    """Direct double summation, O(N^2), ascending-k accumulation."""
    c = _as_array(state)
    return _naive_for(kernel, c.size, compensated)(c, decompose)


def eval_fast(kernel: Kernel, state, decompose: bool = False) -> RhsOutput:
    """FFT-correlation path for ``const`` and ``product`` kernels."""
    c = _as_array(state)
    return _fast_for(kernel, c.size)(c, decompose)


# below this size the O(N^2) path is faster than the transform overhead
AUTO_FAST_THRESHOLD = 128


def make_rhs(kernel: Kernel, n: int, path: str = "auto", compensated: bool = False):
    """Return ``f(c) -> dc/dt`` (a plain array) for repeated evaluation."""
    if path == "auto":
        path = "fast" if kernel.separable and n >= AUTO_FAST_THRESHOLD and not compensated else "naive"
    if path == "naive":
        impl = _naive_for(kernel, n, compensated)
    elif path == "fast":
        impl = _fast_for(kernel, n)
    else:
        raise ValueError(f"unknown rhs path {path!r}")

    def f(c):
        return impl(c).d

    f.path = path
    return f


def evaluate(kernel: Kernel, state, path: str = "auto") -> RhsOutput:
    c = _as_array(state)
    f = make_rhs(kernel, c.size, path)
    return RhsOutput(f(c))
