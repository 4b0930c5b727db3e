"""Random permutations, Poisson multisets and the probability p(k).

A permutation of [n] has an invariant set of size k exactly when some of its
cycle lengths sum to k, so everything here reduces to subset-sum membership
for integer multisets.  In the n -> oo limit the cycle counts become
independent Pois(1/i) variables (model ``A0``); the rescaled model ``A`` uses
Pois(n / (i H_k)) with n = floor(log2 k).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np
from scipy import stats

from . import rngkit
from ._harmonic import EULER_GAMMA, harmonic, sample_harmonic_index
from .errors import CapacityError, DomainError
from .rngkit import MCEstimate, as_stream

LOG2 = math.log(2.0)
INK_EXACT_MAX_N = 42
PK_EXACT_MAX_K = 20


@dataclass(frozen=True)
class GlobalConstants:
    delta: float = 1.0 - (1.0 + math.log(LOG2)) / LOG2
    c: float = -math.log(LOG2) / LOG2
    c0: float = (math.sqrt(math.pi / 2.0) * LOG2 ** 1.5
                 * math.exp(EULER_GAMMA * (1.0 / LOG2 - 1.0)))
    gamma_euler: float = EULER_GAMMA

    @staticmethod
    def n(k: int) -> int:
        """floor(log2 k), computed exactly for integers."""
        k = int(k)
        if k < 1:
            raise DomainError("k must be >= 1")
        return k.bit_length() - 1

    @staticmethod
    def xi(k: int) -> float:
        """Fractional part of log2 k."""
        n = GlobalConstants.n(k)
        if k == 1 << n:
            return 0.0
        return math.log2(k) - n


CONSTANTS = GlobalConstants()


@dataclass(frozen=True)
class CycleType:
    """Cycle counts ``a[i-1]`` = number of cycles of length i of a permutation of [n]."""

    multiplicities: np.ndarray
    n: int

    def __post_init__(self):
        a = np.asarray(self.multiplicities, dtype=np.int64)
        object.__setattr__(self, "multiplicities", a)
        if a.size != self.n or np.any(a < 0):
            raise DomainError("multiplicities must be n nonnegative counts")
        if int(np.dot(np.arange(1, self.n + 1), a)) != self.n:
            raise DomainError("cycle lengths must sum to n")

    @classmethod
    def from_lengths(cls, lengths, n: int) -> "CycleType":
        a = np.bincount(np.asarray(lengths, dtype=np.int64), minlength=n + 1)[1:]
        return cls(a, n)

    def lengths(self) -> np.ndarray:
        return np.repeat(np.arange(1, self.n + 1), self.multiplicities)

    def weight(self) -> Fraction:
        """Probability of this type under the uniform measure on S_n."""
        den = 1
        for i, ai in enumerate(self.multiplicities.tolist(), start=1):
            den *= i ** ai * math.factorial(ai)
        return Fraction(1, den)


@dataclass(frozen=True)
class PoissonMultiset:
    """Multiplicities ``r[i-1]`` of i in [k] for model ``A0`` or ``A``."""

    multiplicities: np.ndarray
    model: str
    k: int
    n: int | None = None
    h_k: float | None = None

    def elements(self) -> np.ndarray:
        return np.repeat(np.arange(1, self.k + 1), self.multiplicities)

    def rates(self) -> np.ndarray:
        i = np.arange(1, self.k + 1, dtype=float)
        if self.model == "A0":
            return 1.0 / i
        return self.n / (i * self.h_k)


def sample_poisson_multiset(k: int, model: str, stream) -> PoissonMultiset:
    """Draw all k multiplicities independently (O(k) work)."""
    if model not in ("A0", "A"):
        raise DomainError("model must be 'A0' or 'A'")
    k = int(k)
    if k < 1:
        raise DomainError("k must be >= 1")
    gen = rngkit.as_generator(stream)
    n = h_k = None
    i = np.arange(1, k + 1, dtype=float)
    if model == "A0":
        lam = 1.0 / i
    else:
        n, h_k = CONSTANTS.n(k), harmonic(k)
        lam = n / (i * h_k)
    r = np.empty(k, dtype=np.int64)
    for j in range(k):
        r[j] = rngkit.poisson(gen, lam[j])
    return PoissonMultiset(r, model, k, n, h_k)


# ---------------------------------------------------------------------------
# subset sums

@numba.njit(cache=True)
def _bitset_hits(values, target, bits):
    """Reachability of ``target`` with a word-packed bitmap; ``bits`` is scratch."""
    nw = target // 64 + 1
    for w in range(nw):
        bits[w] = 0
    bits[0] = 1
    tw = target // 64
    tb = np.uint64(1) << np.uint64(target % 64)
    for v in values:
        if v > target or v <= 0:
            continue
        q = v // 64
        r = np.uint64(v % 64)
        for w in range(nw - 1, q - 1, -1):
            s = bits[w - q] << r
            if r != 0 and w - q - 1 >= 0:
                s |= bits[w - q - 1] >> (np.uint64(64) - r)
            bits[w] |= s
        if bits[tw] & tb:
            return True
    return (bits[tw] & tb) != 0


@numba.njit(cache=True)
def _half_sums(values, lo, hi):
    m = hi - lo
    sums = np.zeros(1 << m, dtype=np.int64)
    size = 1
    for j in range(lo, hi):
        v = values[j]
        for t in range(size):
            sums[size + t] = sums[t] + v
        size *= 2
    return sums


@numba.njit(cache=True)
def _mitm_hits(values, target):
    """Meet-in-the-middle membership test for short value lists."""
    m = values.size
    h = m // 2
    left = np.sort(_half_sums(values, 0, h))
    right = _half_sums(values, h, m)
    for s in right:
        need = target - s
        if need < 0:
            continue
        j = np.searchsorted(left, need)
        if j < left.size and left[j] == need:
            return True
    return False


_SMALL_SPAN = 4096


@numba.njit(cache=True)
def _hits_auto(values, target, bits):
    """Membership test picking a strategy from the shape of ``values``.

    Small elements (while their running total stays below ``_SMALL_SPAN``)
    go into a short bitmap; subset sums of the remaining large elements are
    enumerated and looked up in it.  Falls back to full MITM or a bitmap over
    [0, target] when too many large elements remain.
    """
    if target == 0:
        return True
    m = 0
    for v in values:
        if v <= target:
            m += 1
    vals = np.empty(m, dtype=np.int64)
    j = 0
    for v in values:
        if v <= target:
            vals[j] = v
            j += 1
    vals.sort()
    p = 0
    span = 0
    while p < m and span + vals[p] <= _SMALL_SPAN:
        span += vals[p]
        p += 1
    n_large = m - p
    if n_large <= 18:
        small = np.zeros(span // 64 + 1, dtype=np.uint64)
        small[0] = 1
        for idx in range(p):
            v = vals[idx]
            q = v // 64
            r = np.uint64(v % 64)
            for w in range(small.size - 1, q - 1, -1):
                sh = small[w - q] << r
                if r != 0 and w - q - 1 >= 0:
                    sh |= small[w - q - 1] >> (np.uint64(64) - r)
                small[w] |= sh
        sums = _half_sums(vals, p, m)
        for s in sums:
            need = target - s
            if 0 <= need <= span:
                if (small[need // 64] >> np.uint64(need % 64)) & np.uint64(1):
                    return True
        return False
    if m <= 40 and (1 << (m // 2 + 1)) * (m + 8) < m * (target // 64 + 1):
        return _mitm_hits(vals, target)
    return _bitset_hits(vals, target, bits)


def subset_sum_hits(values, target: int) -> bool:
    """True iff ``target`` is a sum of a sub-multiset of ``values``.

    Uses a word-packed reachability bitmap over [0, target]; each element ORs
    in a shifted copy.  ``target == 0`` is always reachable (empty sum).
    """
    vals = np.asarray(values, dtype=np.int64).ravel()
    if vals.size and vals.min() < 1:
        raise DomainError("values must be positive integers")
    target = int(target)
    if target < 0:
        raise DomainError("target must be >= 0")
    if target == 0:
        return True
    bits = np.zeros(target // 64 + 1, dtype=np.uint64)
    return bool(_bitset_hits(vals, target, bits))


# ---------------------------------------------------------------------------
# permutations

@numba.njit(cache=True)
def _cycle_lengths(gen, n, out):
    """Cycle lengths of a uniform permutation of [n]; returns the count.

    The cycle through the smallest unplaced element has length uniform on
    {1, ..., remaining}; repeating gives the exact cycle-type law.
    """
    rem = n
    c = 0
    while rem > 0:
        L = 1 + np.int64(gen.random() * rem)
        if L > rem:
            L = rem
        out[c] = L
        c += 1
        rem -= L
    return c


def sample_cycle_type(n: int, stream) -> CycleType:
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    out = np.empty(n, dtype=np.int64)
    c = _cycle_lengths(rngkit.as_generator(stream), n, out)
    return CycleType.from_lengths(out[:c], n)


def _partitions(n, max_part=None):
    """Partitions of n as lists of (part, multiplicity), parts decreasing."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield []
        return
    for p in range(min(n, max_part), 0, -1):
        for mult in range(n // p, 0, -1):
            for rest in _partitions(n - p * mult, p - 1):
                yield [(p, mult)] + rest


def i_nk_exact(n: int, k: int) -> Fraction:
    """Exact probability that a uniform permutation of [n] fixes some k-set."""
    n, k = int(n), int(k)
    if n < 1 or not 0 <= k <= n:
        raise DomainError("need n >= 1 and 0 <= k <= n")
    if n > INK_EXACT_MAX_N:
        raise CapacityError(f"n={n} exceeds exact capacity {INK_EXACT_MAX_N}; use i_nk_mc")
    if k in (0, n):
        return Fraction(1)
    nfact = math.factorial(n)
    full = (1 << (k + 1)) - 1
    total = 0
    for parts in _partitions(n):
        reach = 1
        for p, mult in parts:
            if p > k:
                continue
            for _ in range(min(mult, k // p)):
                reach = (reach | (reach << p)) & full
        if reach >> k & 1:
            den = 1
            for p, mult in parts:
                den *= p ** mult * math.factorial(mult)
            total += nfact // den
    return Fraction(total, nfact)


@numba.njit(cache=True)
def _ink_kernel(gen, n, k, count):
    out = np.empty(count)
    lengths = np.empty(n, dtype=np.int64)
    bits = np.zeros(k // 64 + 1, dtype=np.uint64)
    for s in range(count):
        c = _cycle_lengths(gen, n, lengths)
        out[s] = 1.0 if _hits_auto(lengths[:c], k, bits) else 0.0
    return out


def i_nk_mc(n: int, k: int, n_samples: int, seed=0, **kw) -> MCEstimate:
    n, k = int(n), int(k)
    if n < 1 or not 0 <= k <= n:
        raise DomainError("need n >= 1 and 0 <= k <= n")
    return rngkit.mc_estimate(lambda g, c: _ink_kernel(g, n, k, c),
                              n_samples, seed, f"i_nk:{n}:{k}", **kw)


# ---------------------------------------------------------------------------
# p(k)

def _neumaier_add(acc, key, x):
    s, c = acc.get(key, (0.0, 0.0))
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    acc[key] = (t, c)


def pk_exact_small(k: int) -> float:
    """P(k in Sigma(A0)) computed exactly up to rounding.

    Dynamic programme over i = 1..k whose state is the reachable-sum bitmask
    of [0, k].  The multiplicity of i is truncated at floor(k/i), the tail mass
    P(r_i >= floor(k/i)) sitting in the top bucket; states that already reach
    k are absorbed.  Accumulation is compensated (Neumaier).
    """
    k = int(k)
    if k < 1:
        raise DomainError("k must be >= 1")
    if k > PK_EXACT_MAX_K:
        raise CapacityError(f"k={k} exceeds exact capacity {PK_EXACT_MAX_K}; use pk_mc")
    full = (1 << (k + 1)) - 1
    target = 1 << k
    states = {1: (1.0, 0.0)}
    hit = {}
    for i in range(1, k + 1):
        lam = 1.0 / i
        cap = k // i
        pmf = [float(stats.poisson.pmf(j, lam)) for j in range(cap)]
        pmf.append(float(stats.poisson.sf(cap - 1, lam)))
        new = {}
        for mask, (s, c) in states.items():
            p_state = s + c
            m = mask
            for j in range(cap + 1):
                if j:
                    m = (m | (m << i)) & full
                w = p_state * pmf[j]
                if m & target:
                    _neumaier_add(hit, 0, w)
                else:
                    _neumaier_add(new, m, w)
        states = new
    s, c = hit.get(0, (0.0, 0.0))
    return s + c


@numba.njit(cache=True)
def _draw_harmonic_values(gen, count, k, h_k, out):
    for j in range(count):
        out[j] = sample_harmonic_index(gen, k, h_k)


@numba.njit(cache=True)
def _pk_kernel(gen, k, h_k, count):
    out = np.empty(count)
    bits = np.zeros(k // 64 + 1, dtype=np.uint64)
    buf = np.empty(64, dtype=np.int64)
    for s in range(count):
        m = rngkit.poisson(gen, h_k)
        if m > buf.size:
            buf = np.empty(2 * m, dtype=np.int64)
        _draw_harmonic_values(gen, m, k, h_k, buf)
        out[s] = 1.0 if _hits_auto(buf[:m], k, bits) else 0.0
    return out


def pk_mc(k: int, n_samples: int, seed=0, **kw) -> MCEstimate:
    """Monte Carlo estimate of p(k) = P(k in Sigma(A0)).

    Only A0 restricted to [k] matters.  Its total size is Pois(H_k) and, given
    the size, the elements are i.i.d. with P(i) proportional to 1/i, which is
    how a sample is drawn here.
    """
    k = int(k)
    if k < 1:
        raise DomainError("k must be >= 1")
    h_k = harmonic(k)
    return rngkit.mc_estimate(lambda g, c: _pk_kernel(g, k, h_k, c),
                              n_samples, seed, f"pk:{k}", **kw)


@numba.njit(cache=True)
def _model_a_kernel(gen, k, n, h_k, dmax, log_w0, log_exact0, count):
    # columns: reweighted indicator (truncated D window), exact-reweighting indicator
    out = np.zeros((count, 2))
    bits = np.zeros(k // 64 + 1, dtype=np.uint64)
    buf = np.empty(64, dtype=np.int64)
    loglog2 = math.log(math.log(2.0))
    logratio = math.log(h_k / n)
    for s in range(count):
        m = rngkit.poisson(gen, float(n))
        if m > buf.size:
            buf = np.empty(2 * m, dtype=np.int64)
        _draw_harmonic_values(gen, m, k, h_k, buf)
        if _hits_auto(buf[:m], k, bits):
            d = m - n
            if abs(d) <= dmax:
                out[s, 0] = math.exp(log_w0 + d * loglog2)
            out[s, 1] = math.exp(log_exact0 + m * logratio)
    return out


@dataclass
class ChangeOfMeasureReport:
    k: int
    lhs: MCEstimate
    rhs: MCEstimate
    rhs_exact_weight: MCEstimate
    ratio: float
    ratio_std_error: float

    def to_dict(self) -> dict:
        return {"k": self.k, "lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict(),
                "rhs_exact_weight": self.rhs_exact_weight.to_dict(),
                "ratio": self.ratio, "ratio_std_error": self.ratio_std_error}


def change_of_measure_check(k: int, n_samples: int, seed=0, **kw) -> ChangeOfMeasureReport:
    """Compare p(k) with its expression through the rescaled model A.

    ``rhs`` applies the asymptotic weight
    e^{gamma(1/log2 - 1)} k^{-delta} (log 2)^{D - xi} on |A| = n + D,
    |D| <= 20 log n.  ``rhs_exact_weight`` uses the exact likelihood ratio
    e^{n - H_k} (H_k/n)^{|A|}, which makes it an unbiased estimator of p(k).
    """
    k = int(k)
    if not (1 << 8) <= k <= (1 << 20):
        raise DomainError("change_of_measure_check needs 2^8 <= k <= 2^20")
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    n, xi, h_k = CONSTANTS.n(k), CONSTANTS.xi(k), harmonic(k)
    dmax = int(math.floor(20.0 * math.log(n)))
    log_w0 = (EULER_GAMMA * (1.0 / LOG2 - 1.0) - CONSTANTS.delta * math.log(k)
              - xi * math.log(LOG2))
    log_exact0 = n - h_k
    lhs = pk_mc(k, n_samples, seed, **kw)
    stream = as_stream(seed).child(f"com:{k}")
    vals = rngkit.mc_values(
        lambda g, c: _model_a_kernel(g, k, n, h_k, dmax, log_w0, log_exact0, c),
        n_samples, stream, **kw)
    rhs = MCEstimate.from_values(vals[:, 0], stream)
    rhs_exact = MCEstimate.from_values(vals[:, 1], stream)
    ratio = lhs.mean / rhs.mean if rhs.mean > 0 else math.inf
    rel = math.hypot(lhs.std_error / lhs.mean if lhs.mean else 0.0,
                     rhs.std_error / rhs.mean if rhs.mean else 0.0)
    return ChangeOfMeasureReport(k, lhs, rhs, rhs_exact, ratio, ratio * rel)
