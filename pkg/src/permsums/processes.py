"""Upper, lower and auxiliary arrival processes and the conditioned multiset.

Given an upper walk beta, the cell (i-1, i] receives 1 + xi_i uniform
arrivals u; given a lower walk beta', it receives 1 - xi'_i arrivals s, which
the harmonic bucket map phi turns into integers x = phi(s).  When the walk
itself is unconditioned, the arrivals form a rate-1 Poisson process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from . import rngkit
from ._harmonic import bucket_index, harmonic
from .errors import DomainError
from .permlab import CONSTANTS, LOG2
from .rngkit import MCEstimate, as_generator, as_stream
from .walks import Walk, sample_walk

INV_LOG2 = 1.0 / LOG2
_PHI_CAP = 1 << 62


# ---------------------------------------------------------------------------
# phi and phi-tilde

@dataclass(frozen=True)
class HarmonicMap:
    """phi (scale 1/log 2) or phi-tilde (scale n/H_k, values capped at k).

    Both send x > 0 to the unique j with x in (scale H_{j-1}, scale H_j], and 0 to 1.
    """

    mode: str
    k: int | None = None
    n: int | None = None
    h_k: float | None = None

    @classmethod
    def phi(cls) -> "HarmonicMap":
        return cls("phi")

    @classmethod
    def phi_tilde(cls, k: int) -> "HarmonicMap":
        k = int(k)
        if k < 2:
            raise DomainError("phi_tilde needs k >= 2 (so that n >= 1)")
        return cls("phi_tilde", k, CONSTANTS.n(k), harmonic(k))

    @property
    def scale(self) -> float:
        return INV_LOG2 if self.mode == "phi" else self.n / self.h_k

    @property
    def cap(self) -> int:
        return _PHI_CAP if self.mode == "phi" else self.k

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise DomainError("phi is defined for finite x >= 0")
        if self.mode == "phi_tilde" and np.any(arr > self.n):
            raise DomainError(f"phi_tilde needs 0 <= x <= n = {self.n}")
        out = _bucket_array(arr.ravel(), self.scale, self.cap).reshape(arr.shape)
        return int(out) if out.ndim == 0 else out


@numba.njit(cache=True)
def _bucket_array(xs, scale, cap):
    out = np.empty(xs.size, dtype=np.int64)
    for i in range(xs.size):
        out[i] = bucket_index(xs[i], scale, cap)
    return out


def phi(x):
    """Bucket map with edges H_j / log 2."""
    return HarmonicMap.phi()(x)


def phi_tilde(x, k: int):
    """Bucket map with edges H_j n / H_k, n = floor(log2 k)."""
    return HarmonicMap.phi_tilde(k)(x)


def phi_envelope(x_max: float = 60.0, j_max: int = 200000) -> float:
    """sup |log2 phi(x) - x| over 0 <= x <= x_max.

    On a bucket log2 phi(x) - x is linear, so the sup sits at bucket edges;
    edges are scanned exactly for j <= j_max and the remaining buckets,
    where the difference has settled near -gamma/log 2, are sampled on a grid.
    """
    j = np.arange(1, j_max + 1)
    h = np.array([harmonic(int(t)) for t in range(j_max + 1)])
    left = h[:-1] * INV_LOG2  # open left edge of bucket j
    right = h[1:] * INV_LOG2
    keep = left < x_max
    lj = np.log2(j[keep].astype(float))
    vals = np.concatenate((lj - left[keep], lj - np.minimum(right[keep], x_max)))
    tail = np.linspace(right[-1], x_max, 20001) if right[-1] < x_max else np.empty(0)
    if tail.size:
        vals = np.concatenate((vals, np.log2(phi(tail).astype(float)) - tail))
    return float(np.abs(vals).max())


# ---------------------------------------------------------------------------
# conditioned processes

@numba.njit(cache=True)
def _fill_cells(gen, counts):
    total = 0
    for c in counts:
        total += c
    vals = np.empty(total, dtype=np.float64)
    cells = np.empty(total, dtype=np.int64)
    p = 0
    for i in range(counts.size):
        for _ in range(counts[i]):
            vals[p] = rngkit.uniform_oc(gen, float(i), float(i + 1))
            cells[p] = i + 1
            p += 1
    return vals, cells


@dataclass(frozen=True)
class ConditionedUpper:
    """Arrivals u in (0, L] with exactly 1 + xi_i of them in cell (i-1, i].

    ``u`` holds the arrivals cell by cell, in random order within a cell;
    ``cell[j]`` is the cell index of ``u[j]``.
    """

    walk: Walk
    u: np.ndarray
    cell: np.ndarray

    @property
    def L(self) -> int:
        return self.walk.N

    def cell_arrivals(self, i: int) -> np.ndarray:
        return self.u[self.cell == i]

    def sorted_arrivals(self) -> np.ndarray:
        return np.sort(self.u)

    def recovered_walk(self) -> Walk:
        j = np.arange(self.L + 1)
        counts = np.searchsorted(np.sort(self.u), j, side="right")
        return Walk("upper", counts - j)


@dataclass(frozen=True)
class ConditionedLower:
    """Arrivals s with 1 - xi'_i of them in cell (i-1, i], and x = phi(s)."""

    walk: Walk
    s: np.ndarray
    cell: np.ndarray
    x: np.ndarray

    @property
    def L(self) -> int:
        return self.walk.N

    def cell_values(self, i: int) -> np.ndarray:
        return self.x[self.cell == i]

    def recovered_walk(self) -> Walk:
        j = np.arange(self.L + 1)
        counts = np.searchsorted(np.sort(self.s), j, side="right")
        return Walk("lower", j - counts)


def sample_conditioned_upper(beta: Walk, stream) -> ConditionedUpper:
    if not isinstance(beta, Walk) or beta.kind != "upper":
        raise DomainError("sample_conditioned_upper needs an upper walk")
    counts = (1 + beta.increments).astype(np.int64)
    u, cell = _fill_cells(as_generator(stream), counts)
    return ConditionedUpper(beta, u, cell)


def sample_conditioned_lower(beta_prime: Walk, stream) -> ConditionedLower:
    if not isinstance(beta_prime, Walk) or beta_prime.kind != "lower":
        raise DomainError("sample_conditioned_lower needs a lower walk")
    counts = (1 - beta_prime.increments).astype(np.int64)
    s, cell = _fill_cells(as_generator(stream), counts)
    return ConditionedLower(beta_prime, s, cell, _bucket_array(s, INV_LOG2, _PHI_CAP))


def sample_upper_process(L: int, stream) -> ConditionedUpper:
    """Unconditioned upper process on (0, L]: a rate-1 Poisson process."""
    st = as_stream(stream) if not isinstance(stream, np.random.Generator) else stream
    gen = as_generator(st)
    return sample_conditioned_upper(sample_walk("upper", L, gen), gen)


def sample_lower_process(L: int, stream) -> ConditionedLower:
    """Unconditioned lower process: x has Pois(1/(i log 2)) copies of each i."""
    gen = as_generator(stream)
    return sample_conditioned_lower(sample_walk("lower", L, gen), gen)


@dataclass(frozen=True)
class ConditionedMultiset:
    """The multiset (A | beta, beta') for k = 2^(n + xi).

    ``index[j]`` is the dyadic level i in [n] of element ``value[j]``;
    ``source[j]`` is the arrival it came from (s for small levels, u for
    large ones).  b[i-1] is the number of elements at level i.
    """

    k: int
    n: int
    beta: Walk
    beta_prime: Walk
    b: np.ndarray
    index: np.ndarray
    value: np.ndarray
    source: np.ndarray
    upper: ConditionedUpper
    lower: ConditionedLower

    @property
    def D(self) -> int:
        return int(self.beta.values[-1] - self.beta_prime.values[-1])

    @property
    def size(self) -> int:
        return int(self.value.size)


def sample_conditioned_multiset(k: int, beta: Walk, beta_prime: Walk, stream,
                                upper: ConditionedUpper | None = None,
                                lower: ConditionedLower | None = None) -> ConditionedMultiset:
    """Assemble (A | beta, beta').

    Levels i <= floor(n/2) take a = phi~(s) from the lower cells; level
    n + 1 - i for i <= ceil(n/2) takes a = phi~(n - u) from upper cell i.
    Pre-sampled ``upper`` / ``lower`` processes may be supplied to couple
    this multiset with other statistics of the same arrivals.
    """
    k = int(k)
    n = CONSTANTS.n(k)
    if n < 1:
        raise DomainError("k must be >= 2")
    if beta.kind != "upper" or beta_prime.kind != "lower":
        raise DomainError("need an upper walk beta and a lower walk beta'")
    n_up, n_low = (n + 1) // 2, n // 2
    if beta.N != n_up or beta_prime.N != n_low:
        raise DomainError(f"walk lengths must be ({n_up}, {n_low}) for k={k}, "
                          f"got ({beta.N}, {beta_prime.N})")
    if upper is None or lower is None:
        gen = as_generator(stream)
        if upper is None:
            upper = sample_conditioned_upper(beta, gen)
        if lower is None:
            lower = sample_conditioned_lower(beta_prime, gen)
    tmap = HarmonicMap.phi_tilde(k)
    b = np.empty(n, dtype=np.int64)
    b[:n_low] = 1 - beta_prime.increments
    b[n - np.arange(1, n_up + 1)] = 1 + beta.increments
    small_val = _bucket_array(lower.s, tmap.scale, k)
    big_src = n - upper.u
    big_val = _bucket_array(big_src, tmap.scale, k)
    index = np.concatenate((lower.cell, n + 1 - upper.cell))
    value = np.concatenate((small_val, big_val))
    source = np.concatenate((lower.s, upper.u))
    return ConditionedMultiset(k, n, beta, beta_prime, b, index, value, source, upper, lower)


def sample_model_A_pipeline(k: int, stream) -> ConditionedMultiset:
    """Unconditioned walks fed through the assembly; reproduces model A."""
    n = CONSTANTS.n(k)
    gen = as_generator(stream)
    beta = sample_walk("upper", (n + 1) // 2, gen)
    beta_p = sample_walk("lower", n // 2, gen)
    return sample_conditioned_multiset(k, beta, beta_p, gen)


def u_coupling_constant(ms: ConditionedMultiset) -> float:
    """max over large-level elements of |a/k - 2^-u| / (2^(i-n) (n+1-i)/n)."""
    n, k = ms.n, ms.k
    n_low = n // 2
    big = ms.index > n_low
    if not np.any(big):
        return 0.0
    i = ms.index[big].astype(float)
    u = ms.source[big]
    a = ms.value[big].astype(float)
    scale = 2.0 ** (i - n) * (n + 1 - i) / n
    return float(np.max(np.abs(a / k - 2.0 ** (-u)) / scale))


# ---------------------------------------------------------------------------
# phi versus phi-tilde

@numba.njit(cache=True)
def _defect_kernel(gen, i, scale_t, k, count):
    out = np.empty(count)
    for s in range(count):
        x = rngkit.uniform_oc(gen, float(i - 1), float(i))
        a = bucket_index(x, INV_LOG2, _PHI_CAP)
        b = bucket_index(x, scale_t, k)
        out[s] = 1.0 if a != b else 0.0
    return out


def coupling_defect_rate(k: int, i: int, n_samples: int, seed=0, **kw) -> MCEstimate:
    """MC estimate of P(phi(s) != phi~(s)) for s uniform on (i-1, i]."""
    tmap = HarmonicMap.phi_tilde(k)
    i = int(i)
    if not 1 <= i <= tmap.n // 2:
        raise DomainError(f"level i must lie in [1, floor(n/2)] = [1, {tmap.n // 2}]")
    scale, kk = tmap.scale, tmap.k
    return rngkit.mc_estimate(lambda g, c: _defect_kernel(g, i, scale, kk, c),
                              n_samples, seed, f"defect:{k}:{i}", **kw)


def coupling_defect_exact(k: int, i: int) -> float:
    """Lebesgue measure of {s in (i-1, i] : phi(s) != phi~(s)}, by merging bucket edges."""
    tmap = HarmonicMap.phi_tilde(k)
    lo, hi = float(i - 1), float(i)
    edges = [lo, hi]
    for scale, cap in ((INV_LOG2, _PHI_CAP), (tmap.scale, tmap.k)):
        j = bucket_index(lo, scale, cap) if lo > 0 else 1
        while True:
            e = scale * harmonic(j)
            if e >= hi or j >= cap:
                break
            if e > lo:
                edges.append(e)
            j += 1
    edges = np.unique(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    a = _bucket_array(mids, INV_LOG2, _PHI_CAP)
    b = _bucket_array(mids, tmap.scale, tmap.k)
    return float(np.sum(np.diff(edges)[a != b]))
