"""Deterministic random streams, basic samplers and Monte Carlo plumbing.

Every stream is a :class:`StreamSeed` ``(master_seed, stream_id)`` which maps to
an independent Philox generator through ``numpy.random.SeedSequence`` with the
stream id as spawn key.  Monte Carlo work is split into a fixed number of
blocks, block ``b`` drawing from its own derived stream, so results never
depend on how many threads execute the blocks.
"""
from __future__ import annotations

import math
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numba
import numpy as np

from .errors import DomainError

_MASK64 = (1 << 64) - 1
DEFAULT_BLOCKS = 256
POISSON_INVERSION_CUTOFF = 30.0


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _key_to_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    return int(key) & _MASK64


@dataclass(frozen=True)
class StreamSeed:
    """Identifies one reproducible random stream.

    Parameters
    ----------
    master_seed, stream_id : int
        Both must fit in an unsigned 64-bit integer.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _MASK64:
                raise DomainError(f"{name} must be an integer in [0, 2^64), got {v!r}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *keys) -> "StreamSeed":
        """Derive a sub-stream; keys may be ints or strings."""
        sid = int(self.stream_id)
        for key in keys:
            sid = _splitmix64(sid ^ _splitmix64(_key_to_int(key)))
        return StreamSeed(int(self.master_seed), sid)


def as_stream(seed) -> StreamSeed:
    """Accept a StreamSeed or a bare integer master seed."""
    if isinstance(seed, StreamSeed):
        return seed
    return StreamSeed(int(seed), 0)


def as_generator(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    return as_stream(stream).generator()


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error (sample sd / sqrt(n))."""

    mean: float
    std_error: float
    n_samples: int
    seed: StreamSeed

    @classmethod
    def from_values(cls, values, seed) -> "MCEstimate":
        v = np.asarray(values, dtype=float)
        n = v.size
        if n == 0:
            raise DomainError("cannot form an estimate from zero samples")
        mean = float(v.mean())
        sd = float(v.std(ddof=1)) if n > 1 else 0.0
        return cls(mean, sd / math.sqrt(n), int(n), as_stream(seed))

    def zscore(self, target: float) -> float:
        """Signed distance to ``target`` in units of the standard error."""
        diff = self.mean - target
        if self.std_error == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.std_error

    def within(self, target: float, n_sigma: float, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= slack + n_sigma * self.std_error

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "seed": {"master_seed": int(self.seed.master_seed), "stream_id": int(self.seed.stream_id)},
        }


# ---------------------------------------------------------------------------
# jitted samplers (take a numpy Generator)

_EXP_M1 = math.exp(-1.0)


@numba.njit(cache=True)
def poisson1(gen):
    """Pois(1) by sequential cdf inversion."""
    u = gen.random()
    k = 0
    p = _EXP_M1
    f = p
    while u > f:
        k += 1
        p /= k
        f += p
        if p == 0.0:
            break
    return k


@numba.njit(cache=True)
def _poisson_ptrs(gen, lam):
    # transformed rejection with squeeze (Hormann 1993)
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = gen.random() - 0.5
        v = gen.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return np.int64(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1.0)):
            return np.int64(k)


@numba.njit(cache=True)
def poisson(gen, lam):
    """Pois(lam): cdf inversion for lam <= 30, PTRS rejection above."""
    if lam <= 0.0:
        return np.int64(0)
    if lam > POISSON_INVERSION_CUTOFF:
        return _poisson_ptrs(gen, lam)
    u = gen.random()
    k = 0
    p = math.exp(-lam)
    f = p
    while u > f:
        k += 1
        p *= lam / k
        f += p
        if p == 0.0:
            break
    return np.int64(k)


@numba.njit(cache=True)
def uniform_oc(gen, a, b):
    """Uniform on the half-open interval (a, b]."""
    return b - (b - a) * gen.random()


@numba.njit(cache=True)
def exponential1(gen):
    return -math.log1p(-gen.random())


@numba.njit(cache=True)
def _fill_poisson(gen, lam, out):
    for i in range(out.size):
        out[i] = poisson(gen, lam)


@numba.njit(cache=True)
def _fill_uniform(gen, a, b, out):
    for i in range(out.size):
        out[i] = uniform_oc(gen, a, b)


def sample_poisson(lam: float, stream, size: int | None = None):
    """Draw from Poisson(lam).

    Parameters
    ----------
    lam : float
        Nonnegative, finite rate.
    stream : StreamSeed, int or numpy Generator
    size : int, optional
        When given, return an int64 array of that many draws.
    """
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise DomainError(f"Poisson rate must be finite and >= 0, got {lam}")
    gen = as_generator(stream)
    out = np.empty(1 if size is None else int(size), dtype=np.int64)
    _fill_poisson(gen, lam, out)
    return int(out[0]) if size is None else out


def sample_uniform_interval(a: float, b: float, stream, size: int | None = None):
    """Uniform draw(s) from the half-open interval (a, b]."""
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
        raise DomainError(f"need finite a < b, got ({a}, {b}]")
    gen = as_generator(stream)
    out = np.empty(1 if size is None else int(size))
    _fill_uniform(gen, a, b, out)
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# block-partitioned Monte Carlo

def default_threads() -> int:
    env = os.environ.get("PERMLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def block_sizes(n_samples: int, n_blocks: int = DEFAULT_BLOCKS) -> list[int]:
    """Split ``n_samples`` into ``n_blocks`` near-equal parts (earlier blocks larger)."""
    if n_samples < 0 or n_blocks < 1:
        raise DomainError("need n_samples >= 0 and n_blocks >= 1")
    base, extra = divmod(int(n_samples), int(n_blocks))
    return [base + (1 if b < extra else 0) for b in range(n_blocks)]


def run_blocks(kernel: Callable, n_samples: int, stream: StreamSeed, *,
               n_blocks: int = DEFAULT_BLOCKS, threads: int | None = None) -> list:
    """Evaluate ``kernel(generator, count)`` on every nonempty block.

    Block ``b`` uses ``stream.child(b)``.  Results come back in block order,
    so any reduction over them is independent of ``threads``.
    """
    sizes = block_sizes(n_samples, n_blocks)
    jobs = [(b, c) for b, c in enumerate(sizes) if c > 0]
    threads = default_threads() if threads is None else max(1, int(threads))

    def one(job):
        b, c = job
        return kernel(stream.child(b).generator(), c)

    if threads == 1 or len(jobs) <= 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, jobs))


def mc_values(kernel: Callable, n_samples: int, stream: StreamSeed, **kw) -> np.ndarray:
    """Concatenate per-sample values from :func:`run_blocks` in block order."""
    parts = run_blocks(kernel, n_samples, stream, **kw)
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)


def mc_estimate(kernel: Callable, n_samples: int, seed, tag: str, **kw) -> MCEstimate:
    """MCEstimate of the per-sample values produced by ``kernel``.

    ``tag`` names the experiment so that unrelated estimators sharing a master
    seed still draw from disjoint streams.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    stream = as_stream(seed).child(tag)
    return MCEstimate.from_values(mc_values(kernel, n_samples, stream, **kw), stream)


def merge_estimates(parts: Sequence[MCEstimate]) -> MCEstimate:
    """Pool independent estimates of one quantity (inverse-count weighting)."""
    n = sum(p.n_samples for p in parts)
    mean = sum(p.mean * p.n_samples for p in parts) / n
    # recover per-part sums of squares from the standard errors
    ss = 0.0
    for p in parts:
        var = p.std_error ** 2 * p.n_samples
        ss += var * (p.n_samples - 1) + p.n_samples * (p.mean - mean) ** 2
    sd = math.sqrt(ss / (n - 1)) if n > 1 else 0.0
    return MCEstimate(mean, sd / math.sqrt(n), n, parts[0].seed)
