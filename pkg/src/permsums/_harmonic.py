"""Harmonic numbers and the bucket search behind phi / phi-tilde.

``H_N`` is taken from a correctly rounded table for ``N < 64`` and from the
asymptotic expansion otherwise.  After 1/(2N) four Bernoulli terms are kept;
the first omitted one is below 1e-20 at ``N = 64``, far under one ulp of ``H_N``.
"""
import math
from fractions import Fraction

import numba
import numpy as np

EULER_GAMMA = 0.57721566490153286061
_TABLE_SIZE = 64


def _exact_table(size):
    out = np.zeros(size)
    acc = Fraction(0)
    for i in range(1, size):
        acc += Fraction(1, i)
        out[i] = float(acc)
    return out


_H_TABLE = _exact_table(_TABLE_SIZE)


@numba.njit(cache=True)
def harmonic(n):
    """H_n = sum_{i<=n} 1/i for an integer n >= 0."""
    if n < _TABLE_SIZE:
        return _H_TABLE[n]
    x = float(n)
    inv2 = 1.0 / (x * x)
    corr = inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)))
    return math.log(x) + EULER_GAMMA + 0.5 / x - corr


def harmonic_array(n):
    """Array ``[H_0, H_1, ..., H_n]``."""
    return np.array([harmonic(i) for i in range(n + 1)])


@numba.njit(cache=True)
def _bucket_search(x, scale, cap):
    hi = 1
    while scale * harmonic(hi) < x:
        if hi >= cap:
            return cap
        hi = min(2 * hi, cap)
    lo = hi // 2  # scale*H_lo < x, or lo == 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if scale * harmonic(mid) < x:
            lo = mid
        else:
            hi = mid
    return hi


@numba.njit(cache=True)
def bucket_index(x, scale, cap):
    """Smallest j >= 1 with ``x <= scale * H_j`` (1 when x <= 0), capped at ``cap``.

    A guess from H_j ~ log j + gamma is checked against a two-wide bracket;
    if the bracket misses, fall back to exponential-then-binary search.
    """
    if x <= 0.0:
        return 1
    t = x / scale - EULER_GAMMA
    if 1.0 < t < 700.0:
        g = math.exp(t)
        if g < cap:
            lo = max(int(g) - 2, 0)
            hi = min(int(g) + 2, cap)
            if (lo == 0 or scale * harmonic(lo) < x) and scale * harmonic(hi) >= x:
                while hi - lo > 1:
                    mid = (lo + hi) // 2
                    if scale * harmonic(mid) < x:
                        lo = mid
                    else:
                        hi = mid
                return hi
    return _bucket_search(x, scale, cap)


@numba.njit(cache=True)
def sample_harmonic_index(gen, k, h_k):
    """Draw i in [1, k] with P(i) proportional to 1/i."""
    t = gen.random() * h_k
    return bucket_index(t, 1.0, k)
