"""Error-free transformations for float64 arrays (Dekker/Knuth)."""

import numpy as np

_SPLITTER = 134217729.0  # 2^27 + 1


def split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_sum(a, b):
    """``s + e == a + b`` exactly, with ``s = fl(a + b)``."""
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def two_prod(a, b, a_split=None):
    """``p + e == a * b`` exactly, with ``p = fl(a * b)``.

    ``a_split`` may pass a precomputed ``split(a)``.
    """
    p = a * b
    ah, al = split(a) if a_split is None else a_split
    bh, bl = split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def dd_mul_d(hi, lo, b):
    """Double-double ``(hi, lo)`` times double ``b``, renormalised."""
    p, e = two_prod(hi, b)
    e = e + lo * b
    return two_sum(p, e)
