"""Integer random walks with Pois(1)-1 ("upper") and 1-Pois(1) ("lower") steps.

Includes conditioning on staying above -m, the boundedness / positivity /
jump-step detectors, and numerical checks of the limit constants h(m), h'(m),
the ladder height law, the Rayleigh local limit and a large-deviation
envelope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import special

from . import rngkit
from .errors import DomainError, ResourceError
from .rngkit import MCEstimate, as_generator, as_stream, poisson1

KINDS = ("upper", "lower")
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_POIS1_PMF = np.array([math.exp(-1.0 - math.lgamma(j + 1.0)) for j in range(32)])


def _sign(kind: str) -> int:
    if kind == "upper":
        return 1
    if kind == "lower":
        return -1
    raise DomainError(f"kind must be 'upper' or 'lower', got {kind!r}")


@dataclass(frozen=True)
class WalkParams:
    kappa: float = 0.01
    eta: float = 0.01


DEFAULT_PARAMS = WalkParams()


@dataclass(frozen=True)
class Walk:
    """A lattice path beta(0..N) with beta(0) = 0.

    Upper walks have increments >= -1, lower walks increments <= +1.
    """

    kind: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int64)
        object.__setattr__(self, "values", v)
        sgn = _sign(self.kind)
        if v.ndim != 1 or v.size < 1 or v[0] != 0:
            raise DomainError("walk values must start at beta(0) = 0")
        inc = np.diff(v)
        if np.any(sgn * inc < -1):
            raise DomainError(f"increments violate the {self.kind} walk support")

    @classmethod
    def from_increments(cls, kind: str, increments) -> "Walk":
        inc = np.asarray(increments, dtype=np.int64)
        return cls(kind, np.concatenate(([0], np.cumsum(inc))))

    @property
    def N(self) -> int:
        return self.values.size - 1

    @property
    def increments(self) -> np.ndarray:
        """xi_1..xi_N (index 0 of the array is xi_1)."""
        return np.diff(self.values)

    @property
    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate(self.values)

    @property
    def min(self) -> int:
        return int(self.values.min())

    @property
    def argmin(self) -> int:
        """First index attaining the minimum."""
        return int(np.argmin(self.values))

    def min_after_start(self) -> int:
        """min over 1 <= i <= N (the quantity conditioned on)."""
        if self.N == 0:
            raise DomainError("empty walk")
        return int(self.values[1:].min())

    def __len__(self):
        return self.N


# ---------------------------------------------------------------------------
# sampling

@numba.njit(cache=True)
def _fill_walk(gen, sign, out):
    b = 0
    out[0] = 0
    for i in range(1, out.size):
        b += sign * (poisson1(gen) - 1)
        out[i] = b


def sample_walk(kind: str, N: int, stream) -> Walk:
    sign = _sign(kind)
    if N < 1:
        raise DomainError("N must be >= 1")
    out = np.empty(N + 1, dtype=np.int64)
    _fill_walk(as_generator(stream), sign, out)
    return Walk(kind, out)


@numba.njit(cache=True)
def _doob_path(gen, m, out):
    """Upper walk tilted by the harmonic function c -> m + 1 + c."""
    c = 0
    out[0] = 0
    for i in range(1, out.size):
        u = gen.random()
        base = m + 1 + c
        r = -1
        acc = 0.0
        while True:
            w = base + r
            if w > 0 and r + 1 < _POIS1_PMF.size:
                acc += _POIS1_PMF[r + 1] * w / base
            if acc >= u or r > 60:
                break
            r += 1
        c += r
        out[i] = c


@numba.njit(cache=True)
def _rejection_path(gen, sign, m, out, max_attempts):
    """Unconditioned walks until one stays >= -m on 1..N; returns attempts or -1."""
    N = out.size - 1
    for attempt in range(1, max_attempts + 1):
        b = 0
        ok = True
        out[0] = 0
        for i in range(1, N + 1):
            b += sign * (poisson1(gen) - 1)
            out[i] = b
            if b < -m:
                ok = False
                break
        if ok:
            return attempt
    return -1


@numba.njit(cache=True)
def _omega_rejection_path(gen, m, out, cap, max_attempts):
    """Weighted rejection for the h-tilted upper law on the first N steps.

    Survivors are accepted with probability (m+1+beta(N)) / (m+1+cap); the
    linear h is the exact harmonic function, so accepted paths follow the
    same law as the Doob chain.  Returns attempts, or -1 on budget exhaustion.
    """
    N = out.size - 1
    for attempt in range(1, max_attempts + 1):
        b = 0
        ok = True
        out[0] = 0
        for i in range(1, N + 1):
            b += poisson1(gen) - 1
            out[i] = b
            if b < -m:
                ok = False
                break
        if ok and gen.random() * (m + 1 + cap) < m + 1 + b:
            return attempt
    return -1


def _rejection_budget(kind: str, m: int, N: int) -> int:
    h_guess = SQRT_2_OVER_PI * (m + 1.0 if kind == "upper" else m + 1.5)
    p = min(1.0, h_guess / math.sqrt(N))
    return int(math.ceil(200.0 / p))


def sample_conditioned_walk(kind: str, m: int, N: int, stream, method: str | None = None) -> Walk:
    """A walk with min_{1<=i<=N} beta(i) >= -m.

    Methods
    -------
    ``"doob"`` (upper default)
        Markov chain with kernel P(xi = r)(m+1+c+r)^+ / (m+1+c): the law of the
        walk conditioned to stay >= -m forever, restricted to N steps.
    ``"omega-rejection"`` (upper only)
        Same law as ``"doob"``, by weighted rejection of unconditioned paths.
    ``"rejection"`` (lower default)
        Plain rejection: the law conditioned on survival up to time N.
    """
    sign = _sign(kind)
    m, N = int(m), int(N)
    if m < 0 or N < 1:
        raise DomainError("need m >= 0 and N >= 1")
    if method is None:
        method = "doob" if kind == "upper" else "rejection"
    gen = as_generator(stream)
    out = np.empty(N + 1, dtype=np.int64)
    if method == "doob":
        if kind != "upper":
            raise DomainError("the Doob chain is exact only for the upper walk")
        _doob_path(gen, m, out)
    elif method == "omega-rejection":
        if kind != "upper":
            raise DomainError("omega-rejection is defined for the upper walk")
        budget = 200 * (N + 2 * m + 60)
        if _omega_rejection_path(gen, m, out, N + 60, budget) < 0:
            raise ResourceError(f"omega-rejection exhausted {budget} attempts (m={m}, N={N})")
    elif method == "rejection":
        budget = _rejection_budget(kind, m, N)
        if _rejection_path(gen, sign, m, out, budget) < 0:
            est = min(1.0, SQRT_2_OVER_PI * (m + 1) / math.sqrt(N))
            raise ResourceError(
                f"rejection budget of {budget} attempts exhausted for {kind} walk "
                f"(m={m}, N={N}, estimated acceptance {est:.3g})")
    else:
        raise DomainError(f"unknown method {method!r}")
    return Walk(kind, out)


# ---------------------------------------------------------------------------
# detectors

def _check_L(w: Walk, L: int) -> int:
    L = int(L)
    if not 0 <= L <= w.N:
        raise DomainError(f"L={L} outside [0, {w.N}]")
    return L


def r_bounded_index(w: Walk, L: int, params: WalkParams = DEFAULT_PARAMS) -> int:
    """Smallest integer R >= 1 with |xi_i| <= R i^kappa for 1 <= i <= L."""
    L = _check_L(w, L)
    if L == 0:
        return 1
    xi = np.abs(w.increments[:L]).astype(float)
    i = np.arange(1, L + 1, dtype=float)
    return max(1, int(np.ceil(xi / i ** params.kappa).max()))


def t_positive_index(w: Walk, L: int, params: WalkParams = DEFAULT_PARAMS) -> int:
    """Smallest integer T >= 0 with -T + l^(1/2-eta) <= beta(l) <= T + l^(1/2+eta), l <= L."""
    L = _check_L(w, L)
    if L == 0:
        return 0
    ell = np.arange(1, L + 1, dtype=float)
    b = w.values[1:L + 1].astype(float)
    lower = np.ceil(ell ** (0.5 - params.eta) - b).max()
    upper = np.ceil(b - ell ** (0.5 + params.eta)).max()
    return int(max(0.0, lower, upper))


def find_jump_step(w: Walk, V: int, t_min: int, t_max: int,
                   params: WalkParams = DEFAULT_PARAMS) -> int | None:
    """First V-jump step t in [t_min, t_max], or None.

    t qualifies when 1 + xi_t = V, beta(t+l) - beta(t) >= l^(1/2-2 eta) for
    0 <= l <= N-t, and xi_{t+l} <= l^(2 kappa) for 1 <= l <= N-t.
    """
    N = w.N
    if not 1 <= t_min <= t_max <= N:
        raise DomainError("need 1 <= t_min <= t_max <= N")
    beta = w.values
    xi = w.increments
    for t in range(int(t_min), int(t_max) + 1):
        if 1 + xi[t - 1] != V:
            continue
        ell = np.arange(0, N - t + 1, dtype=float)
        if np.any(beta[t:] - beta[t] < ell ** (0.5 - 2 * params.eta)):
            continue
        if np.any(xi[t:] > ell[1:] ** (2 * params.kappa)):
            continue
        return t
    return None


# ---------------------------------------------------------------------------
# h(m), h'(m)

def h_closed_form(kind: str, m: int) -> float:
    """Known closed forms of h(m) (upper) and h'(m) (lower)."""
    _sign(kind)
    if kind == "upper":
        if m >= 0:
            return SQRT_2_OVER_PI * (m + 1)
        if m == -1:
            return SQRT_2_OVER_PI * math.exp(-1.0)
    else:
        if m == 0:
            return math.e / math.sqrt(2.0 * math.pi)
        if m == -1:
            return 1.0 / math.sqrt(2.0 * math.pi)
    raise DomainError(f"no closed form recorded for {kind} walk at m={m}")


@numba.njit(cache=True)
def _h_kernel(gen, sign, m, N, count):
    out = np.zeros(count)
    scale = math.sqrt(N)
    for s in range(count):
        b = 0
        ok = True
        for i in range(N):
            b += sign * (poisson1(gen) - 1)
            if b < -m:
                ok = False
                break
        if ok:
            out[s] = scale
    return out


def h_estimate(kind: str, m: int, N: int, n_samples: int, seed=0, **kw) -> MCEstimate:
    """MC estimate of N^(1/2) P(min_{1<=i<=N} beta(i) >= -m)."""
    sign = _sign(kind)
    m, N = int(m), int(N)
    if m < -1 or N < 1:
        raise DomainError("need m >= -1 and N >= 1")
    return rngkit.mc_estimate(lambda g, c: _h_kernel(g, sign, m, N, c),
                              n_samples, seed, f"h:{kind}:{m}:{N}", **kw)


# ---------------------------------------------------------------------------
# local limit

def rayleigh_W(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x * np.exp(-0.5 * x * x), 0.0)


@numba.njit(cache=True)
def _endpoint_law(sign, m, N, top):
    """Sub-probabilities P(beta(N) = x, min_{1..N} beta >= -m) for -m <= x <= top."""
    J = m + top + 1
    cur = np.zeros(J)
    nxt = np.zeros(J)
    cur[m] = 1.0
    R = _POIS1_PMF.size
    for _ in range(N):
        for j in range(J):
            nxt[j] = 0.0
        for j in range(J):
            p = cur[j]
            if p == 0.0:
                continue
            for k in range(R):
                jj = j + sign * (k - 1)
                if 0 <= jj < J:
                    nxt[jj] += p * _POIS1_PMF[k]
        cur, nxt = nxt, cur
    return cur


def conditioned_endpoint_law(kind: str, m: int, N: int):
    """Exact law of beta(N) given min_{1<=i<=N} beta(i) >= -m.

    Forward recursion on the killed walk; states above ``12 sqrt(N) + 60`` are
    dropped (their mass is far below double precision).

    Returns
    -------
    xs : ndarray of int
    pmf : ndarray
    survival : float
        P(min_{1<=i<=N} beta(i) >= -m).
    """
    sign = _sign(kind)
    if m < 0 or N < 1:
        raise DomainError("need m >= 0 and N >= 1")
    top = int(12 * math.sqrt(N)) + 60
    law = _endpoint_law(sign, int(m), int(N), top)
    surv = float(law.sum())
    xs = np.arange(-m, top + 1)
    keep = law > 0
    return xs[keep], law[keep] / surv, surv


@numba.njit(cache=True)
def _rejection_endpoints(gen, sign, m, N, count, max_attempts):
    out = np.empty(count, dtype=np.int64)
    attempts = 0
    for s in range(count):
        while True:
            attempts += 1
            if attempts > max_attempts:
                return out[:s], attempts
            b = 0
            ok = True
            for i in range(N):
                b += sign * (poisson1(gen) - 1)
                if b < -m:
                    ok = False
                    break
            if ok:
                out[s] = b
                break
    return out, attempts


@numba.njit(cache=True)
def _sample_from_cdf(gen, cdf, count):
    out = np.empty(count, dtype=np.int64)
    for s in range(count):
        out[s] = np.searchsorted(cdf, gen.random(), side="right")
    return out


def sample_conditioned_endpoints(kind: str, m: int, N: int, n_samples: int, seed=0,
                                 method: str = "rejection", **kw) -> np.ndarray:
    """Independent draws of beta(N) conditioned on min_{1<=i<=N} beta(i) >= -m.

    ``"rejection"`` simulates walks and keeps survivors; ``"exact"`` draws by
    inversion from :func:`conditioned_endpoint_law`.
    """
    sign = _sign(kind)
    m, N = int(m), int(N)
    stream = as_stream(seed).child(f"endpoints:{kind}:{m}:{N}:{method}")
    if method == "rejection":
        budget = _rejection_budget(kind, m, N)

        def kern(g, c):
            vals, att = _rejection_endpoints(g, sign, m, N, c, budget * c)
            if vals.size < c:
                raise ResourceError(f"rejection budget exhausted after {att} attempts")
            return vals
        return rngkit.mc_values(kern, n_samples, stream, **kw).astype(np.int64)
    if method == "exact":
        xs, pmf, _ = conditioned_endpoint_law(kind, m, N)
        cdf = np.cumsum(pmf)
        cdf /= cdf[-1]
        cdf[-1] = 1.0
        idx = rngkit.mc_values(lambda g, c: _sample_from_cdf(g, cdf, c), n_samples, stream, **kw)
        return xs[idx.astype(np.int64)]
    raise DomainError(f"unknown method {method!r}")


@numba.njit(cache=True)
def _doob_endpoints(gen, m, N, count):
    out = np.empty(count, dtype=np.int64)
    path = np.empty(N + 1, dtype=np.int64)
    for s in range(count):
        _doob_path(gen, m, path)
        out[s] = path[N]
    return out


@numba.njit(cache=True)
def _omega_endpoints(gen, m, N, cap, count, max_attempts):
    out = np.empty(count, dtype=np.int64)
    path = np.empty(N + 1, dtype=np.int64)
    for s in range(count):
        if _omega_rejection_path(gen, m, path, cap, max_attempts) < 0:
            return out[:s]
        out[s] = path[N]
    return out


@dataclass
class SamplerTVReport:
    m: int
    N: int
    n_samples: int
    tv_distance: float

    def to_dict(self) -> dict:
        return {"m": self.m, "N": self.N, "n_samples": self.n_samples,
                "tv_distance": self.tv_distance}


def h_transform_tv(m: int, N: int, n_samples: int, seed=0, **kw) -> SamplerTVReport:
    """TV distance between beta(N) histograms from the Doob chain and omega-rejection."""
    m, N = int(m), int(N)
    if m < 0 or N < 1:
        raise DomainError("need m >= 0 and N >= 1")
    root = as_stream(seed).child("h-transform-tv", m, N)
    cap = N + 60
    budget = 200 * (N + 2 * m + 60)

    def omega(g, c):
        vals = _omega_endpoints(g, m, N, cap, c, budget)
        if vals.size < c:
            raise ResourceError("omega-rejection budget exhausted")
        return vals

    a = rngkit.mc_values(lambda g, c: _doob_endpoints(g, m, N, c), n_samples, root.child("doob"), **kw)
    b = rngkit.mc_values(omega, n_samples, root.child("omega"), **kw)
    a, b = a.astype(np.int64) + m, b.astype(np.int64) + m
    size = int(max(a.max(), b.max())) + 1
    pa = np.bincount(a, minlength=size) / a.size
    pb = np.bincount(b, minlength=size) / b.size
    return SamplerTVReport(m, N, int(n_samples), 0.5 * float(np.abs(pa - pb).sum()))


@dataclass
class LLTReport:
    kind: str
    m: int
    N: int
    n_samples: int
    tv_distance: float
    xs: np.ndarray
    counts: np.ndarray
    proxy: np.ndarray
    method: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m, "N": self.N, "n_samples": self.n_samples,
                "method": self.method, "tv_distance": self.tv_distance,
                "histogram": {"x": self.xs.tolist(), "count": self.counts.tolist()}}


def llt_check(kind: str, m: int, N: int, n_samples: int, seed=0,
              method: str = "rejection", **kw) -> LLTReport:
    """TV distance between the conditioned endpoint histogram and the Rayleigh proxy.

    The proxy pmf is W(x / sqrt N) / sqrt N with W(t) = t e^{-t^2/2},
    renormalised over the observed integer support (unit bins).
    """
    if m < 0 or N < 100:
        raise DomainError("llt_check needs m >= 0 and N >= 100")
    ends = sample_conditioned_endpoints(kind, m, N, n_samples, seed, method=method, **kw)
    lo, hi = int(ends.min()), int(ends.max())
    xs = np.arange(lo, hi + 1)
    counts = np.bincount(ends - lo, minlength=xs.size)
    emp = counts / counts.sum()
    proxy = rayleigh_W(xs / math.sqrt(N)) / math.sqrt(N)
    proxy = proxy / proxy.sum()
    tv = 0.5 * float(np.abs(emp - proxy).sum())
    return LLTReport(kind, int(m), int(N), int(ends.size), tv, xs, counts, proxy, method)


# ---------------------------------------------------------------------------
# ladder heights and renewal

@numba.njit(cache=True)
def _ladder_kernel(gen, sign, cap, count):
    """First strict ascent Z and its epoch; Z = -1 marks a walk censored at ``cap``."""
    z = np.full(count, -1, dtype=np.int64)
    tau = np.full(count, -1, dtype=np.int64)
    for s in range(count):
        b = 0
        for i in range(1, cap + 1):
            b += sign * (poisson1(gen) - 1)
            if b > 0:
                z[s] = b
                tau[s] = i
                break
    return np.stack((z, tau))


@dataclass
class LadderStats:
    """Empirical law of the first strict ascending ladder height Z+ and epoch tau+."""

    kind: str
    z_values: np.ndarray
    z_pmf: np.ndarray  # index j -> P(Z+ = j), entry 0 unused
    tau_median: float
    mean_Z_plus: MCEstimate
    n_censored: int
    cap: int


@dataclass
class LadderReport:
    upper: LadderStats
    lower_all_one: bool
    renewal_m: np.ndarray
    renewal: np.ndarray
    renewal_std_error: np.ndarray
    target_mean: float = math.e / 2.0
    target_renewal: float = 2.0 / math.e

    def renewal_at(self, m: int) -> tuple[float, float]:
        i = int(np.nonzero(self.renewal_m == m)[0][0])
        return float(self.renewal[i]), float(self.renewal_std_error[i])

    def to_dict(self) -> dict:
        u = self.upper
        return {
            "mean_Z_plus": u.mean_Z_plus.to_dict(),
            "target_mean": self.target_mean,
            "n_censored": u.n_censored,
            "cap": u.cap,
            "tau_median": u.tau_median,
            "z_pmf": u.z_pmf[1:].tolist(),
            "lower_Z_plus_all_one": self.lower_all_one,
            "renewal": {"m": self.renewal_m.tolist(), "value": self.renewal.tolist(),
                        "std_error": self.renewal_std_error.tolist(),
                        "target": self.target_renewal},
        }


def renewal_sums(pmf: np.ndarray, m_max: int) -> np.ndarray:
    """u(m) = sum_r P(X_1 + ... + X_r = m) for i.i.d. X with P(X = j) = pmf[j], j >= 1."""
    u = np.zeros(m_max + 1)
    u[0] = 1.0
    for m in range(1, m_max + 1):
        js = np.arange(1, min(m, pmf.size - 1) + 1)
        u[m] = float(np.dot(pmf[js], u[m - js]))
    return u


def _ladder_stats(kind, n_samples, stream, cap, **kw) -> LadderStats:
    sign = _sign(kind)
    parts = rngkit.run_blocks(lambda g, c: _ladder_kernel(g, sign, cap, c), n_samples, stream, **kw)
    z = np.concatenate([p[0] for p in parts])
    tau = np.concatenate([p[1] for p in parts])
    done = z > 0
    zs = z[done]
    pmf = np.bincount(zs, minlength=2).astype(float) / max(zs.size, 1)
    taus = tau.astype(float)
    taus[~done] = np.inf
    return LadderStats(kind, zs, pmf, float(np.median(taus)),
                       MCEstimate.from_values(zs, stream), int((~done).sum()), int(cap))


def ladder_and_renewal_check(n_samples: int, seed=0, cap: int = 10 ** 6,
                             m_range: tuple[int, int] = (20, 60), n_groups: int = 32,
                             **kw) -> LadderReport:
    """Ladder-height mean and renewal sums for the upper walk.

    Walks that have not ascended after ``cap`` steps are censored (dropped and
    counted); the epoch has infinite mean, so some cap is unavoidable.
    Renewal-sum standard errors come from a grouped jackknife.
    """
    if n_samples < n_groups:
        raise DomainError(f"need at least {n_groups} samples")
    stream = as_stream(seed).child("ladder")
    up = _ladder_stats("upper", n_samples, stream.child("upper"), cap, **kw)
    low = _ladder_stats("lower", max(1000, n_samples // 100), stream.child("lower"), cap, **kw)
    m_lo, m_hi = m_range
    ms = np.arange(m_lo, m_hi + 1)
    u_full = renewal_sums(up.z_pmf, m_hi)[ms]
    groups = np.array_split(up.z_values, n_groups)
    jmax = up.z_pmf.size
    counts = [np.bincount(g, minlength=jmax) for g in groups]
    total = np.sum(counts, axis=0)
    loo = []
    for c in counts:
        rest = total - c
        loo.append(renewal_sums(rest / rest.sum(), m_hi)[ms])
    loo = np.array(loo)
    se = np.sqrt((n_groups - 1) / n_groups * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    lower_ok = bool(low.z_values.size > 0 and np.all(low.z_values == 1))
    return LadderReport(up, lower_ok, ms, u_full, se)


# ---------------------------------------------------------------------------
# Borel identity and large deviations

def borel_identity_check(N_terms: int) -> float:
    """Partial sum of n^(n-1) e^(-n) / n! over 1 <= n <= N_terms (log-space terms)."""
    N_terms = int(N_terms)
    if N_terms < 1:
        raise DomainError("N_terms must be >= 1")
    n = np.arange(1, N_terms + 1, dtype=float)
    terms = np.exp((n - 1.0) * np.log(n) - n - special.gammaln(n + 1.0))
    return float(math.fsum(terms[::-1]))


@dataclass
class EnvelopeReport:
    n: int
    C: float
    passed: bool
    i: np.ndarray
    tail: np.ndarray
    bound: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.tail / self.bound))

    def to_dict(self) -> dict:
        return {"n": self.n, "C": self.C, "passed": self.passed, "max_ratio": self.max_ratio}


@numba.njit(cache=True)
def _endpoint_kernel(gen, n, count):
    out = np.empty(count, dtype=np.int64)
    for s in range(count):
        out[s] = rngkit.poisson(gen, float(n)) - n
    return out


def large_deviation_envelope_check(n: int, n_samples: int, seed=0, C: float = 3.0,
                                   **kw) -> EnvelopeReport:
    """Empirical P(beta(n) >= i) against C exp(-i^2 / 4n) for 0 <= i <= n (upper walk).

    beta(n) + n is Pois(n), which is sampled directly.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    stream = as_stream(seed).child(f"ldev:{n}")
    ends = rngkit.mc_values(lambda g, c: _endpoint_kernel(g, n, c), n_samples, stream, **kw)
    ends = ends.astype(np.int64)
    i = np.arange(0, n + 1)
    clipped = np.clip(ends, -1, n)
    counts = np.bincount(clipped + 1, minlength=n + 2)[1:]  # counts for values 0..n
    tail = counts[::-1].cumsum()[::-1] / ends.size
    bound = C * np.exp(-(i.astype(float) ** 2) / (4.0 * n))
    return EnvelopeReport(n, C, bool(np.all(tail <= bound)), i, tail, bound)
