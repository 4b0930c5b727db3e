"""The periodic function g, its Fourier coefficients, and the thinning function g0.

g(x) = sum_D (log 2)^(D - x) (1 - exp(-2^(D - x))), a bilateral series in D.
Its Fourier coefficients are values of Gamma on the line Re s = log log 2 / log 2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from scipy import integrate, special

from .errors import DomainError
from .rngkit import MCEstimate, mc_estimate

LOG2 = math.log(2.0)
LOGLOG2 = math.log(LOG2)
SIGMA = LOGLOG2 / LOG2  # real part of the Gamma argument, about -0.5288
OMEGA = 2.0 * math.pi / LOG2  # imaginary step per Fourier mode

# Positive-D terms shrink like (log 2)^D, negative-D terms like (2 log 2)^D.
# Both are below 1e-17 relative to g well inside this range.
D_MIN, D_MAX = -160, 160
G0_D_MIN, G0_D_MAX = -70, 10
G_HAT_MAX_MODE = 64


def _frac(x):
    x = np.asarray(x, dtype=float)
    return x - np.floor(x)


def _g_series(x, lam=1.0):
    """sum_D (log 2)^(D - x) (1 - exp(-lam 2^(D - x))) for an array of x.

    Terms are added from smallest to largest magnitude (the two tails first).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    # reduce to [0,1) and move the integer part into D; lam shifts the same way
    shift = np.floor(x)
    t = x - shift
    D = np.arange(D_MIN, D_MAX + 1, dtype=float)[:, None]
    e = D - t[None, :]
    terms = np.exp(e * LOGLOG2) * -np.expm1(-lam * np.exp2(e))
    order = np.argsort(np.abs(D[:, 0] - 0.5))[::-1]
    total = np.zeros(t.size)
    for i in order:
        total += terms[i]
    return total, shift


def g_eval(x):
    """g(x); periodic with period 1.  Accepts scalars or arrays."""
    val, _ = _g_series(x)
    return float(val[0]) if np.ndim(x) == 0 else val.reshape(np.shape(x))


def g_hat(m: int) -> complex:
    """Fourier coefficient -(1/log 2) Gamma(sigma + i 2 pi m / log 2).

    Gamma is evaluated as Gamma(s + 2) / (s (s + 1)) in log space, so very
    large |m| underflows cleanly to 0 instead of overflowing in between.
    """
    m = int(m)
    if abs(m) > G_HAT_MAX_MODE:
        raise DomainError(f"|m| must be <= {G_HAT_MAX_MODE}")
    s = complex(SIGMA, OMEGA * m)
    lg = special.loggamma(s + 2.0) - np.log(s) - np.log(s + 1.0)
    return complex(-np.exp(lg) / LOG2)


def decay_bound(m: int) -> float:
    """(6 / log 2) exp(-pi^2 |m| / log 2)."""
    return 6.0 / LOG2 * math.exp(-math.pi ** 2 * abs(m) / LOG2)


def gamma_strip_oracle(s: complex) -> complex:
    """I_s = int_0^inf u^(s-1) (1 - e^-u) du for -1 < Re s < 0, by direct integration.

    Split at u = 1: on [0, 1] the integrand is expanded in powers of u and
    integrated term by term; on [1, inf) the u^(s-1) part integrates to -1/s
    and the u^(s-1) e^-u part is a damped oscillation in log u, handled by
    QUADPACK's Fourier-weighted rule.  Equals -Gamma(s) on the strip.
    """
    s = complex(s)
    if not -1.0 < s.real < 0.0:
        raise DomainError("gamma_strip_oracle needs -1 < Re s < 0")
    head = 0.0j
    fact = 1.0
    for n in range(1, 40):
        fact *= n
        head += (-1) ** (n + 1) / (fact * (s + n))
    sig, tau = s.real, s.imag
    # substitute u = e^t: int_0^inf e^(sig t) e^(-e^t) e^(i tau t) dt
    f = lambda t: math.exp(sig * t - math.exp(t))
    top = 6.0  # e^(-e^6) ~ 1e-175
    kw = dict(epsabs=1e-16, epsrel=1e-14, limit=400)
    with warnings.catch_warnings():
        # the requested tolerance sits at roundoff level; QUADPACK says so
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if tau == 0.0:
            re = integrate.quad(f, 0.0, top, **kw)[0]
            im = 0.0
        else:
            re = integrate.quad(f, 0.0, top, weight="cos", wvar=tau, **kw)[0]
            im = integrate.quad(f, 0.0, top, weight="sin", wvar=tau, **kw)[0]
    return head - 1.0 / s - complex(re, im)


@dataclass(frozen=True)
class FourierTable:
    """Coefficients g_hat(m) for |m| <= M, stored for m = -M..M."""

    M: int
    coeffs: np.ndarray

    @classmethod
    def build(cls, M: int = 3) -> "FourierTable":
        if not 0 <= M <= G_HAT_MAX_MODE:
            raise DomainError(f"M must lie in [0, {G_HAT_MAX_MODE}]")
        pos = [g_hat(m) for m in range(M + 1)]
        coeffs = np.array([np.conj(pos[-m]) for m in range(-M, 0)] + pos, dtype=complex)
        return cls(M, coeffs)

    def __getitem__(self, m: int) -> complex:
        if abs(m) > self.M:
            raise KeyError(m)
        return complex(self.coeffs[m + self.M])

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def decay_bound(self, m: int) -> float:
        return decay_bound(m)

    def reconstruct(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        ph = np.exp(2j * np.pi * np.outer(x, self.modes))
        return (ph @ self.coeffs).real

    def tail_bound(self) -> float:
        """Bound on sum_{|m| > M} |g_hat(m)| from the decay bound."""
        q = math.exp(-math.pi ** 2 / LOG2)
        return 2.0 * decay_bound(self.M + 1) / (1.0 - q)


@dataclass(frozen=True)
class GLambda:
    direct: float
    transformed: float

    @property
    def discrepancy(self) -> float:
        return abs(self.direct - self.transformed)


def g_lambda_eval(lam: float, xi: float) -> GLambda:
    """g_lambda(xi) by its own series and by the transformation law
    lambda^(-log log 2 / log 2) g(xi - log2 lambda)."""
    lam = float(lam)
    if not lam > 0.0 or not math.isfinite(lam):
        raise DomainError("lambda must be a positive finite number")
    direct, _ = _g_series(float(xi), lam)
    transformed = lam ** (-SIGMA) * g_eval(float(xi) - math.log2(lam))
    return GLambda(float(direct[0]), float(transformed))


def g0_eval(t):
    """g0(t) = sum_D 2^(D+t) exp(-2^(D+t)), D truncated to [-70, 10]."""
    scalar = np.ndim(t) == 0
    f = _frac(np.atleast_1d(np.asarray(t, dtype=float)))
    D = np.arange(G0_D_MIN, G0_D_MAX + 1, dtype=float)[:, None]
    y = np.exp2(D + f[None, :])
    val = (y * np.exp(-y)).sum(axis=0)
    return float(val[0]) if scalar else val


def g_ratio(n_grid: int = 100000) -> float:
    """max g / min g - 1 on a uniform grid of [0, 1)."""
    v = g_eval(np.arange(n_grid) / n_grid)
    return float(v.max() / v.min() - 1.0)


# ---------------------------------------------------------------------------
# binomial thinning

@numba.njit(cache=True)
def _thinning_kernel(gen, k, count):
    out = np.empty(count)
    for s in range(count):
        pop = k
        hit = pop == 1
        while pop > 1:
            pop = gen.binomial(pop, 0.5)
            if pop == 1:
                hit = True
        out[s] = 1.0 if hit else 0.0
    return out


@numba.njit(cache=True)
def _thinning_days_kernel(gen, k, count):
    out = np.empty(count)
    for s in range(count):
        pop = k
        days = 0
        while pop > 0:
            if pop == 1:
                days += 1
            pop = gen.binomial(pop, 0.5)
        out[s] = days
    return out


def _check_k(k) -> int:
    k = int(k)
    if k < 1:
        raise DomainError("population k must be >= 1")
    return k


def thinning_mc(k: int, n_samples: int, seed=0, **kw) -> MCEstimate:
    """P(the population is exactly 1 on some day), starting from k on day 0."""
    k = _check_k(k)
    return mc_estimate(lambda g, c: _thinning_kernel(g, k, c), n_samples, seed, "thinning", **kw)


def thinning_days_mc(k: int, n_samples: int, seed=0, **kw) -> MCEstimate:
    """Expected number of days (day 0 included) with exactly one survivor."""
    k = _check_k(k)
    return mc_estimate(lambda g, c: _thinning_days_kernel(g, k, c), n_samples, seed,
                       "thinning-days", **kw)
