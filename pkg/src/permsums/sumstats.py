"""Subset-sum statistics rho and tau, with interchangeable counting engines.

rho counts sign patterns eps in {0,1}^m with sum eps_i 2^-u_i in the closed
window [1 - 2^-w, 1]; tau counts distinct subset sums of positive integers.

For rho, every 2^-u_i is rounded once to a 56-bit fixed-point integer and
the window ends are widened by ``RHO_TOL`` and converted the same way, so all
engines compare identical integers and agree exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import CapacityError, DomainError

RHO_TOL = 1e-12
_FIXED_BITS = 56


@dataclass
class Capacities:
    rho_brute: int = 26
    rho_mitm: int = 52
    tau_brute: int = 24
    tau_bitset_sum: int = 1 << 36
    tau_split_large: int = 26


CAPACITY = Capacities()


@dataclass(frozen=True)
class RhoInput:
    """Exponents u_i > 0, window exponent w, normalizer exponent z."""

    exponents: np.ndarray
    w: float
    z: float
    mode: str = "plain"

    def __post_init__(self):
        u = np.asarray(self.exponents, dtype=float).ravel()
        object.__setattr__(self, "exponents", u)
        if u.size and (not np.all(np.isfinite(u)) or np.any(u <= 0)):
            raise DomainError("rho exponents must be finite and > 0")
        if self.mode not in ("plain", "star", "partial-cell"):
            raise DomainError(f"unknown rho mode {self.mode!r}")

    @property
    def m(self) -> int:
        return self.exponents.size


@dataclass(frozen=True)
class TauInput:
    """Positive integers x_i and normalizer exponent z."""

    values: np.ndarray
    z: float

    def __post_init__(self):
        x = np.asarray(self.values, dtype=np.int64).ravel()
        object.__setattr__(self, "values", x)
        if x.size and x.min() < 1:
            raise DomainError("tau values must be positive integers")

    @property
    def m(self) -> int:
        return self.values.size


# ---------------------------------------------------------------------------
# rho engines

def _rho_fixed(inp: RhoInput):
    scale = 2.0 ** _FIXED_BITS
    vals = np.rint(np.exp2(-inp.exponents) * scale).astype(np.int64)
    lo = int(math.ceil((1.0 - 2.0 ** (-inp.w) - RHO_TOL) * scale))
    hi = int(math.floor((1.0 + RHO_TOL) * scale))
    return vals, lo, hi


@numba.njit(cache=True)
def _rho_brute(vals, lo, hi):
    m = vals.size
    s = 0
    cnt = 1 if lo <= 0 <= hi else 0
    state = np.zeros(m, dtype=np.bool_)
    for g in range(1, 1 << m):
        # Gray code: flip the lowest set bit position of g
        j = 0
        while not (g >> j) & 1:
            j += 1
        if state[j]:
            s -= vals[j]
        else:
            s += vals[j]
        state[j] = not state[j]
        if lo <= s <= hi:
            cnt += 1
    return cnt


@numba.njit(cache=True)
def _sorted_sums(vals, start, stop):
    """All 2^(stop-start) subset sums, sorted, built by repeated merging."""
    size = 1
    cur = np.zeros(1 << (stop - start), dtype=np.int64)
    tmp = np.empty_like(cur)
    for idx in range(start, stop):
        v = vals[idx]
        a = 0
        b = 0
        o = 0
        while a < size and b < size:
            x = cur[a]
            y = cur[b] + v
            if x <= y:
                tmp[o] = x
                a += 1
            else:
                tmp[o] = y
                b += 1
            o += 1
        while a < size:
            tmp[o] = cur[a]
            a += 1
            o += 1
        while b < size:
            tmp[o] = cur[b] + v
            b += 1
            o += 1
        size *= 2
        cur, tmp = tmp, cur
    return cur


@numba.njit(cache=True)
def _rho_mitm(vals, lo, hi):
    m = vals.size
    h = (m + 1) // 2
    left = _sorted_sums(vals, 0, h)
    right = _sorted_sums(vals, h, m)
    nl = left.size
    cnt = 0
    a = 0  # first left index with left >= lo - r
    b = 0  # first left index with left > hi - r
    for j in range(right.size - 1, -1, -1):
        r = right[j]
        while a < nl and left[a] < lo - r:
            a += 1
        while b < nl and left[b] <= hi - r:
            b += 1
        cnt += b - a
    return cnt


def rho_raw_count(inp: RhoInput, engine: str = "auto") -> int:
    """Integer count #{eps : sum eps_i 2^-u_i in [1 - 2^-w, 1]}."""
    m = inp.m
    if engine == "auto":
        engine = "brute" if m <= 10 else "mitm"
    vals, lo, hi = _rho_fixed(inp)
    if engine == "brute":
        if m > CAPACITY.rho_brute:
            raise CapacityError(f"brute-force rho limited to m <= {CAPACITY.rho_brute}, got {m}")
        return int(_rho_brute(vals, lo, hi))
    if engine == "mitm":
        if m > CAPACITY.rho_mitm:
            raise CapacityError(f"MITM rho limited to m <= {CAPACITY.rho_mitm}, got {m}")
        return int(_rho_mitm(vals, lo, hi))
    raise DomainError(f"unknown rho engine {engine!r}")


def rho_count(inp: RhoInput, engine: str = "auto") -> float:
    """2^z times the number of sign patterns landing in the window."""
    return rho_raw_count(inp, engine) * 2.0 ** inp.z


# ---------------------------------------------------------------------------
# tau engines

@numba.njit(cache=True)
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@numba.njit(cache=True)
def _popcount(bits, nwords):
    c = 0
    for i in range(nwords):
        c += _popcount64(bits[i])
    return c


@numba.njit(cache=True)
def _or_shifted(dst, src, nsrc, offset):
    """dst |= src << offset, for src occupying words [0, nsrc)."""
    q = offset // 64
    r = np.uint64(offset % 64)
    if r == 0:
        for i in range(nsrc):
            dst[i + q] |= src[i]
    else:
        back = np.uint64(64) - r
        for i in range(nsrc):
            w = src[i]
            dst[i + q] |= w << r
            dst[i + q + 1] |= w >> back


@numba.njit(cache=True)
def _reach_bitset(vals, total):
    """Bitmap of subset sums over [0, total]; elements processed in given order."""
    nw = total // 64 + 1
    bits = np.zeros(nw + 1, dtype=np.uint64)
    bits[0] = 1
    reach = 0
    for v in vals:
        reach += v
        top = min(reach // 64, nw - 1)
        q = v // 64
        r = np.uint64(v % 64)
        for w in range(top, q - 1, -1):
            s = bits[w - q] << r
            if r != 0 and w - q - 1 >= 0:
                s |= bits[w - q - 1] >> (np.uint64(64) - r)
            bits[w] |= s
    return bits, nw


@numba.njit(cache=True)
def _tau_bitset(vals):
    total = 0
    for v in vals:
        total += v
    bits, nw = _reach_bitset(vals, total)
    # bits above ``total`` are never set: sums cannot exceed it
    return _popcount(bits, nw)


@numba.njit(cache=True)
def _prefix_counts(vals):
    total = 0
    for v in vals:
        total += v
    nw = total // 64 + 1
    bits = np.zeros(nw + 1, dtype=np.uint64)
    bits[0] = 1
    out = np.empty(vals.size + 1, dtype=np.int64)
    out[0] = 1
    reach = 0
    for j in range(vals.size):
        v = vals[j]
        reach += v
        top = min(reach // 64, nw - 1)
        q = v // 64
        r = np.uint64(v % 64)
        for w in range(top, q - 1, -1):
            s = bits[w - q] << r
            if r != 0 and w - q - 1 >= 0:
                s |= bits[w - q - 1] >> (np.uint64(64) - r)
            bits[w] |= s
        out[j + 1] = _popcount(bits, top + 1)
    return out


def tau_prefix_counts(values) -> np.ndarray:
    """Distinct subset-sum counts of every prefix x_1..x_j (j = 0..m), in the given order."""
    x = TauInput(values, 0.0).values
    if int(x.sum()) > CAPACITY.tau_bitset_sum:
        raise CapacityError(f"prefix counts limited to sum <= {CAPACITY.tau_bitset_sum}")
    return _prefix_counts(x)


@numba.njit(cache=True)
def _tau_brute(vals):
    m = vals.size
    sums = np.zeros(1 << m, dtype=np.int64)
    size = 1
    for v in vals:
        for t in range(size):
            sums[size + t] = sums[t] + v
        size *= 2
    sums.sort()
    c = 1
    for i in range(1, sums.size):
        if sums[i] != sums[i - 1]:
            c += 1
    return c


@numba.njit(cache=True)
def _distinct_sorted_sums(vals, start, stop):
    """Sorted distinct subset sums of vals[start:stop] (merge with dedupe)."""
    cap = 1 << (stop - start)
    cur = np.zeros(cap, dtype=np.int64)
    tmp = np.empty(cap, dtype=np.int64)
    size = 1
    for idx in range(start, stop):
        v = vals[idx]
        a = 0
        b = 0
        o = 0
        last = -1
        while a < size or b < size:
            if b >= size or (a < size and cur[a] <= cur[b] + v):
                x = cur[a]
                a += 1
            else:
                x = cur[b] + v
                b += 1
            if x != last:
                tmp[o] = x
                o += 1
                last = x
        size = o
        cur, tmp = tmp, cur
    return cur[:size]


@numba.njit(cache=True)
def _tau_split(vals, h):
    """Distinct sums of sorted ``vals`` as (low part bitmap) + (high part sums).

    Two sums a + b, a' + b' with b != b' can only coincide when
    |b - b'| <= max low sum, so high sums are grouped into clusters with
    gaps at most that; unions of shifted low bitmaps are counted per cluster.
    """
    m = vals.size
    span = 0
    for i in range(h):
        span += vals[i]
    low, nlw = _reach_bitset(vals[:h], span)
    low_count = _popcount(low, nlw)
    highs = _distinct_sorted_sums(vals, h, m)
    K = highs.size
    total = 0
    scratch = np.zeros(64, dtype=np.uint64)
    t = 0
    while t < K:
        e = t
        while e + 1 < K and highs[e + 1] - highs[e] <= span:
            e += 1
        if e == t:
            total += low_count
        else:
            width = highs[e] - highs[t] + span
            nw = width // 64 + 2
            if scratch.size < nw + 1:
                scratch = np.zeros(2 * nw + 2, dtype=np.uint64)
            for q in range(t, e + 1):
                _or_shifted(scratch, low, nlw, highs[q] - highs[t])
            total += _popcount(scratch, nw + 1)
            for q in range(nw + 1):
                scratch[q] = 0
        t = e + 1
    return total


def _split_plan(sorted_vals: np.ndarray) -> int:
    """Number of low elements minimising a rough cost model for the split engine."""
    m = sorted_vals.size
    prefix = np.concatenate(([0], np.cumsum(sorted_vals, dtype=np.float64)))
    best_h, best_cost = m, math.inf
    for h in range(max(0, m - CAPACITY.tau_split_large), m + 1):
        n_high = 2.0 ** (m - h)
        words = prefix[h] / 64.0 + 1.0
        cost = n_high * (4.0 + words) + h * words
        if cost < best_cost:
            best_h, best_cost = h, cost
    return best_h


def tau_raw_count(inp: TauInput, engine: str = "auto") -> int:
    """Number of distinct subset sums (including the empty sum 0)."""
    x = inp.values
    m = x.size
    if m == 0:
        return 1
    if engine == "auto":
        engine = "split"
    if engine == "brute":
        if m > CAPACITY.tau_brute:
            raise CapacityError(f"brute-force tau limited to m <= {CAPACITY.tau_brute}, got {m}")
        return int(_tau_brute(x))
    if engine == "bitset":
        total = int(x.sum())
        if total > CAPACITY.tau_bitset_sum:
            raise CapacityError(f"bitset tau limited to sum <= {CAPACITY.tau_bitset_sum}, got {total}")
        return int(_tau_bitset(np.sort(x)))
    if engine == "split":
        xs = np.sort(x)
        h = _split_plan(xs)
        if m - h > CAPACITY.tau_split_large or int(xs[:h].sum()) > CAPACITY.tau_bitset_sum:
            raise CapacityError("input exceeds split-engine capacity")
        return int(_tau_split(xs, h))
    raise DomainError(f"unknown tau engine {engine!r}")


def tau_count(inp: TauInput, engine: str = "auto") -> float:
    """2^z times the number of distinct subset sums."""
    return tau_raw_count(inp, engine) * 2.0 ** inp.z


# ---------------------------------------------------------------------------
# statistics of conditioned processes

def rho_star(proc, ell: int, engine: str = "auto") -> float:
    """2^-beta(l) #{eps : sum over arrivals in (0, l] in [1 - 2^-l, 1]}; 1 at l = 0."""
    ell = int(ell)
    if not 0 <= ell <= proc.L:
        raise DomainError(f"ell must lie in [0, {proc.L}]")
    if ell == 0:
        return 1.0
    u = proc.u[proc.cell <= ell]
    b = int(proc.walk.values[ell])
    return rho_count(RhoInput(u, w=ell, z=-b, mode="star"), engine)


def tau_star(proc, ell: int, engine: str = "auto") -> float:
    """2^(beta'(l) - l) #distinct sums of the x in cells <= l; 1 at l = 0."""
    ell = int(ell)
    if not 0 <= ell <= proc.L:
        raise DomainError(f"ell must lie in [0, {proc.L}]")
    if ell == 0:
        return 1.0
    x = proc.x[proc.cell <= ell]
    b = int(proc.walk.values[ell])
    return tau_count(TauInput(x, z=b - ell), engine)


@dataclass
class UnstarInfo:
    ell_prime: int
    r: int
    clamped: bool


def rho_unstar(proc, ell: int, engine: str = "auto", return_info: bool = False):
    """rho of the first l arrivals, read off cell by cell.

    l' is the first cell index with l' + beta(l') >= l and r the number of
    arrivals still needed from that cell; the r smallest arrivals of cell l'
    join all earlier cells, and the window exponent is the r-th smallest of
    them (which is the l-th arrival overall).
    """
    ell = int(ell)
    beta = proc.walk.values
    if ell < 1:
        raise DomainError("rho_unstar needs ell >= 1")
    reach = np.arange(beta.size) + beta  # arrivals in (0, j]
    hits = np.nonzero(reach[1:] >= ell)[0]
    if hits.size == 0:
        raise DomainError(f"process of length {proc.L} has only {int(reach[-1])} arrivals; "
                          f"ell={ell} needs a longer walk")
    lp = int(hits[0]) + 1
    r = ell - int(reach[lp - 1])
    cell_u = np.sort(proc.u[proc.cell == lp])
    clamped = r > cell_u.size
    r_used = min(r, cell_u.size)
    u = np.concatenate((proc.u[proc.cell < lp], cell_u[:r_used]))
    w = float(cell_u[r_used - 1])
    val = rho_count(RhoInput(u, w=w, z=w - ell, mode="partial-cell"), engine)
    if return_info:
        return val, UnstarInfo(lp, r, clamped)
    return val


def tau_unstar(proc, ell: int, engine: str = "auto") -> float:
    """tau of the l smallest values x."""
    ell = int(ell)
    if ell < 0:
        raise DomainError("ell must be >= 0")
    if ell == 0:
        return 1.0
    if proc.x.size < ell:
        raise DomainError(f"process of length {proc.L} has only {proc.x.size} values; "
                          f"ell={ell} needs a longer walk")
    order = np.argsort(proc.s, kind="stable")
    x = proc.x[order[:ell]]
    return tau_count(TauInput(x, z=-ell), engine)


def rho_plain(u_sorted, ell: int, engine: str = "auto") -> float:
    """rho_u(l) straight from the definition on sorted arrivals u_1 <= u_2 <= ..."""
    u = np.asarray(u_sorted, dtype=float)[:int(ell)]
    w = float(u[-1])
    return rho_count(RhoInput(u, w=w, z=w - ell), engine)
