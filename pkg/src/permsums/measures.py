"""Monte Carlo Fourier coefficients of the measures mu and mu', the predicted f,
and two empirical cross-checks against direct simulation.

Both measures are sampled the same way: one pass draws (weight, log2 statistic)
pairs, and every requested mode r is assembled from those same pairs, so the
estimates at r and -r are exact complex conjugates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from . import permlab
from .errors import CapacityError, DomainError, ResourceError
from .gfun import FourierTable
from .permlab import CONSTANTS
from .processes import (INV_LOG2, _PHI_CAP, _bucket_array, sample_conditioned_lower,
                        sample_conditioned_multiset, sample_conditioned_upper)
from .rngkit import MCEstimate, StreamSeed, as_stream, mc_values
from .sumstats import CAPACITY, RhoInput, TauInput, rho_raw_count, rho_star, tau_raw_count, tau_star
from .walks import SQRT_2_OVER_PI, Walk, r_bounded_index, sample_conditioned_walk, t_positive_index

DEFAULT_ELL_RHO = 24
DEFAULT_ELL_TAU = 28
TAU_ELL_MAX = 34
MODE_MAX = 3


@dataclass(frozen=True)
class MeasureEstimate:
    """Estimate of one Fourier coefficient; ``real`` and ``imag`` share samples."""

    measure: str
    r: int
    ell: int
    real: MCEstimate
    imag: MCEstimate
    n_samples: int
    seed: StreamSeed

    @property
    def value(self) -> complex:
        return complex(self.real.mean, self.imag.mean)

    @property
    def std_error(self) -> float:
        return math.hypot(self.real.std_error, self.imag.std_error)

    def to_dict(self) -> dict:
        return {"measure": self.measure, "r": self.r, "ell": self.ell,
                "real": self.real.to_dict(), "imag": self.imag.to_dict(),
                "n_samples": self.n_samples}


# ---------------------------------------------------------------------------
# per-sample draws

def _check_samples(n_samples: int) -> int:
    n = int(n_samples)
    if n < 1:
        raise DomainError("n_samples must be >= 1")
    return n


def _rho_pairs(ell: int, engine: str):
    """Kernel producing rows (w, log2 rho) for rate-1 arrivals u_1 < ... < u_l."""

    def kernel(gen, count):
        u = np.cumsum(gen.exponential(1.0, size=(count, ell)), axis=1)
        out = np.zeros((count, 2))
        out[:, 1] = -np.inf
        w = np.maximum(ell - u[:, -1], 0.0)
        out[:, 0] = w
        for j in np.nonzero(w > 0)[0]:
            uj = u[j]
            cnt = rho_raw_count(RhoInput(uj, w=uj[-1], z=0.0), engine)
            if cnt > 0:
                out[j, 1] = math.log2(cnt) + uj[-1] - ell
        return out

    return kernel


def _tau_pairs(ell: int, engine: str):
    """Kernel producing rows (w, log2 tau) for the first l lower-process values."""

    def kernel(gen, count):
        s = np.cumsum(gen.exponential(1.0, size=(count, ell)), axis=1)
        x = _bucket_array(s.ravel(), INV_LOG2, _PHI_CAP).reshape(count, ell)
        out = np.zeros((count, 2))
        out[:, 1] = -np.inf
        w = np.maximum(np.log2(x[:, -1].astype(float)) - ell, 0.0)
        out[:, 0] = w
        for j in np.nonzero(w > 0)[0]:
            cnt = tau_raw_count(TauInput(x[j], 0.0), engine)
            out[j, 1] = math.log2(cnt) - ell
        return out

    return kernel


def _draw(measure: str, ell: int, n_samples: int, seed, engine: str, **kw):
    ell = int(ell)
    n_samples = _check_samples(n_samples)
    if measure == "mu":
        if not 1 <= ell <= CAPACITY.rho_mitm:
            raise CapacityError(f"mu estimator needs 1 <= ell <= {CAPACITY.rho_mitm}")
        kernel = _rho_pairs(ell, engine)
    else:
        if not 1 <= ell <= TAU_ELL_MAX:
            raise CapacityError(f"mu' estimator needs 1 <= ell <= {TAU_ELL_MAX}")
        kernel = _tau_pairs(ell, engine)
    stream = as_stream(seed).child(measure, ell)
    return mc_values(kernel, n_samples, stream, **kw), stream


def _contributions(pairs: np.ndarray, r: int) -> np.ndarray:
    """sqrt(2/pi) w stat^(c - 2 pi i r / log 2), zero where w = 0 or stat = 0."""
    w, L = pairs[:, 0], pairs[:, 1]
    out = np.zeros(w.size, dtype=complex)
    ok = (w > 0) & np.isfinite(L)
    amp = SQRT_2_OVER_PI * w[ok] * np.exp2(CONSTANTS.c * L[ok])
    ph = 2.0 * math.pi * r * L[ok]
    out[ok] = amp * np.cos(ph) - 1j * amp * np.sin(ph)
    if r == 0:
        out.imag[:] = 0.0
    return out


def _assemble(measure, pairs, rs, ell, stream) -> dict[int, MeasureEstimate]:
    res = {}
    for r in rs:
        v = _contributions(pairs, int(r))
        res[int(r)] = MeasureEstimate(measure, int(r), ell,
                                      MCEstimate.from_values(v.real, stream),
                                      MCEstimate.from_values(v.imag, stream),
                                      pairs.shape[0], stream)
    return res


def _check_modes(rs: Iterable[int]) -> list[int]:
    rs = [int(r) for r in rs]
    if not rs:
        raise DomainError("need at least one mode")
    return rs


def mu_hat_table(rs: Iterable[int], ell: int = DEFAULT_ELL_RHO, n_samples: int = 10 ** 5,
                 seed=0, engine: str = "auto", **kw) -> dict[int, MeasureEstimate]:
    """Estimates of mu_hat(r) for every r in ``rs`` from one shared sample."""
    rs = _check_modes(rs)
    pairs, stream = _draw("mu", ell, n_samples, seed, engine, **kw)
    return _assemble("mu", pairs, rs, int(ell), stream)


def mu_hat_mc(r: int, ell: int = DEFAULT_ELL_RHO, n_samples: int = 10 ** 5, seed=0,
              **kw) -> MeasureEstimate:
    """mu_hat(r) = sqrt(2/pi) E (l - u_l)^+ rho_u(l)^(c - 2 pi i r / log 2)."""
    return mu_hat_table([r], ell, n_samples, seed, **kw)[int(r)]


def mu_prime_hat_table(rs: Iterable[int], ell: int = DEFAULT_ELL_TAU, n_samples: int = 10 ** 5,
                       seed=0, engine: str = "auto", **kw) -> dict[int, MeasureEstimate]:
    rs = _check_modes(rs)
    pairs, stream = _draw("mu-prime", ell, n_samples, seed, engine, **kw)
    return _assemble("mu-prime", pairs, rs, int(ell), stream)


def mu_prime_hat_mc(r: int, ell: int = DEFAULT_ELL_TAU, n_samples: int = 10 ** 5, seed=0,
                    **kw) -> MeasureEstimate:
    """mu'_hat(r) = sqrt(2/pi) E (log2 x_l - l)^+ tau_x(l)^(c - 2 pi i r / log 2)."""
    return mu_prime_hat_table([r], ell, n_samples, seed, **kw)[int(r)]


def mu_functional_mc(psi: Callable, measure: str = "mu", ell: int | None = None,
                     n_samples: int = 10 ** 4, seed=0, **kw) -> MCEstimate:
    """sqrt(2/pi) E w stat^c psi(log2 stat) for a 1-periodic function psi.

    With psi = 1 this is the total mass, i.e. the r = 0 coefficient.
    """
    if measure not in ("mu", "mu-prime"):
        raise DomainError("measure must be 'mu' or 'mu-prime'")
    if ell is None:
        ell = DEFAULT_ELL_RHO if measure == "mu" else DEFAULT_ELL_TAU
    pairs, stream = _draw(measure, ell, n_samples, seed, "auto", **kw)
    return MCEstimate.from_values(functional_values(pairs, psi), stream)


def functional_values(pairs: np.ndarray, psi: Callable) -> np.ndarray:
    w, L = pairs[:, 0], pairs[:, 1]
    out = np.zeros(w.size)
    ok = (w > 0) & np.isfinite(L)
    frac = L[ok] - np.floor(L[ok])
    out[ok] = SQRT_2_OVER_PI * w[ok] * np.exp2(CONSTANTS.c * L[ok]) * np.asarray(psi(frac), float)
    return out


def draw_pairs(measure: str, ell: int, n_samples: int, seed=0, **kw) -> np.ndarray:
    """Raw (weight, log2 statistic) rows behind the estimators, for diagnostics."""
    if measure not in ("mu", "mu-prime"):
        raise DomainError("measure must be 'mu' or 'mu-prime'")
    return _draw(measure, ell, n_samples, seed, "auto", **kw)[0]


# ---------------------------------------------------------------------------
# f = c0 g * mu * mu'

@dataclass(frozen=True)
class PredictedF:
    xi: np.ndarray
    f: np.ndarray
    modes: np.ndarray
    g_hat: np.ndarray
    mu_hat: np.ndarray
    mu_prime_hat: np.ndarray
    stat_error: float
    truncation_error: float
    max_imag: float

    @property
    def error_budget(self) -> float:
        return self.stat_error + self.truncation_error

    def to_dict(self) -> dict:
        cx = lambda a: [[float(z.real), float(z.imag)] for z in a]
        return {"xi": self.xi.tolist(), "f": self.f.tolist(), "modes": self.modes.tolist(),
                "g_hat": cx(self.g_hat), "mu_hat": cx(self.mu_hat),
                "mu_prime_hat": cx(self.mu_prime_hat), "stat_error": self.stat_error,
                "truncation_error": self.truncation_error, "max_imag": self.max_imag}


def _table_values(table, modes, name):
    vals, errs = [], []
    for m in modes:
        m = int(m)
        if m in table:
            e, conj = table[m], False
        elif -m in table:
            e, conj = table[-m], True
        else:
            raise DomainError(f"{name} table lacks mode {m}")
        if isinstance(e, MeasureEstimate):
            v, se = e.value, e.std_error
        else:
            v, se = complex(e), 0.0
        vals.append(np.conj(v) if conj else v)
        errs.append(se)
    return np.array(vals, dtype=complex), np.array(errs)


def predict_f(mu_table: Mapping, mu_prime_table: Mapping, g_table: FourierTable | None = None,
              xi=None, M: int | None = None) -> PredictedF:
    """f(xi) = sum_{|m| <= M} c0 g_hat(m) mu_hat(m) mu'_hat(m) e^(2 pi i m xi).

    Tables map mode -> complex value or MeasureEstimate; a missing -m is
    filled by conjugating +m.  M defaults to the largest mode both tables cover.  Coefficients are symmetrized before summing so
    f comes out real.
    """
    if M is None:
        common = min(max(abs(int(m)) for m in mu_table), max(abs(int(m)) for m in mu_prime_table))
        M = min(common, g_table.M if g_table is not None else MODE_MAX)
    if g_table is None or g_table.M < M:
        g_table = FourierTable.build(M)
    modes = np.arange(-M, M + 1)
    gh = np.array([g_table[int(m)] for m in modes])
    mu, mu_err = _table_values(mu_table, modes, "mu")
    mp, mp_err = _table_values(mu_prime_table, modes, "mu'")
    coef = CONSTANTS.c0 * gh * mu * mp
    sym = 0.5 * (coef + np.conj(coef[::-1]))
    xi = np.linspace(0.0, 1.0, 101)[:-1] if xi is None else np.atleast_1d(np.asarray(xi, float))
    raw = np.exp(2j * np.pi * np.outer(xi, modes)) @ sym
    # first-order propagation, each mode's error bounding its contribution to f
    stat = float(np.sum(CONSTANTS.c0 * np.abs(gh) * (np.abs(mp) * mu_err + np.abs(mu) * mp_err)))
    i0 = M  # index of mode 0
    trunc = CONSTANTS.c0 * g_table.tail_bound() * abs(mu[i0]) * abs(mp[i0])
    return PredictedF(xi, raw.real.copy(), modes, gh, mu, mp, stat, float(trunc),
                      float(np.abs(raw.imag).max()))


# ---------------------------------------------------------------------------
# Poisson-paradigm check

@dataclass(frozen=True)
class PairResult:
    D: int
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float


@dataclass
class ParadigmReport:
    k: int
    ell_requested: int
    ell_used: int
    n_walk_pairs: int
    n_inner: int
    lhs: float
    rhs: float
    discrepancy: MCEstimate
    pairs: list = field(default_factory=list)
    gate_rejections: int = 0
    tolerance: float = 0.1

    @property
    def passed(self) -> bool:
        return abs(self.discrepancy.mean) <= self.tolerance + 3.0 * self.discrepancy.std_error

    def to_dict(self) -> dict:
        return {"k": self.k, "ell_requested": self.ell_requested, "ell_used": self.ell_used,
                "n_walk_pairs": self.n_walk_pairs, "n_inner": self.n_inner,
                "lhs": self.lhs, "rhs": self.rhs, "discrepancy": self.discrepancy.to_dict(),
                "gate_rejections": self.gate_rejections, "tolerance": self.tolerance,
                "passed": self.passed,
                "pairs": [{"D": p.D, "lhs": p.lhs, "rhs": p.rhs} for p in self.pairs]}


GATE_MIN, GATE_R, GATE_T = 2, 8, 8


def _gated_walk(kind: str, N: int, gen, max_tries: int = 10000):
    for attempt in range(max_tries):
        w = sample_conditioned_walk(kind, GATE_MIN, N, gen, method="rejection")
        if r_bounded_index(w, N) <= GATE_R and t_positive_index(w, N) <= GATE_T:
            return w, attempt
    raise ResourceError(f"no {kind} walk passed the R/T gates in {max_tries} tries")


def paradigm_pair(k: int, beta: Walk, beta_prime: Walk, ell: int, n_inner: int,
                  stream) -> tuple[np.ndarray, np.ndarray]:
    """Inner trials for one walk pair: (hit indicators, 1 - exp(-2^(D - xi) rho* tau*)).

    Trial j draws the upper and lower processes from their own sub-streams,
    so both sides see the same arrivals and changing one walk leaves the
    other process untouched.
    """
    st = as_stream(stream)
    xi = CONSTANTS.xi(k)
    D = int(beta.values[-1] - beta_prime.values[-1])
    hits = np.empty(n_inner)
    rhs = np.empty(n_inner)
    for j in range(n_inner):
        up = sample_conditioned_upper(beta, st.child(j, "u").generator())
        lo = sample_conditioned_lower(beta_prime, st.child(j, "x").generator())
        ms = sample_conditioned_multiset(k, beta, beta_prime, None, upper=up, lower=lo)
        hits[j] = 1.0 if permlab.subset_sum_hits(ms.value, k) else 0.0
        prod = rho_star(up, ell) * tau_star(lo, ell)
        rhs[j] = -math.expm1(-(2.0 ** (D - xi)) * prod)
    return hits, rhs


def poisson_paradigm_check(k: int, n_walk_pairs: int = 50, n_inner: int = 200, ell: int = 20,
                           seed=0) -> ParadigmReport:
    """Compare P(k in Sigma(A | beta, beta')) with 1 - E exp(-2^(D - xi) rho* tau*).

    Walks are drawn by rejection with min >= -2 and R, T <= 8.  ``ell`` is
    clamped to the shorter walk; the clamp is recorded in the report.
    """
    k = int(k)
    if not 2 ** 14 <= k <= 2 ** 24:
        raise DomainError("paradigm check needs 2^14 <= k <= 2^24")
    n_pairs, n_inner = int(n_walk_pairs), int(n_inner)
    if n_pairs < 2 or n_inner < 1:
        raise DomainError("need n_walk_pairs >= 2 and n_inner >= 1")
    if int(ell) > CAPACITY.rho_mitm:
        raise CapacityError(f"ell limited to {CAPACITY.rho_mitm}")
    n = CONSTANTS.n(k)
    n_up, n_low = (n + 1) // 2, n // 2
    ell_used = max(1, min(int(ell), n_low))
    root = as_stream(seed).child("paradigm", k)
    pairs, diffs = [], []
    rejections = 0
    for p in range(n_pairs):
        gen = root.child(p, "walks").generator()
        beta, a = _gated_walk("upper", n_up, gen)
        beta_p, b = _gated_walk("lower", n_low, gen)
        rejections += a + b
        hits, rhs = paradigm_pair(k, beta, beta_p, ell_used, n_inner, root.child(p, "inner"))
        se = lambda v: float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        pairs.append(PairResult(int(beta.values[-1] - beta_p.values[-1]), float(hits.mean()),
                                float(rhs.mean()), se(hits), se(rhs)))
        diffs.append(hits.mean() - rhs.mean())
    disc = MCEstimate.from_values(np.array(diffs), root)
    return ParadigmReport(k, int(ell), ell_used, n_pairs, n_inner,
                          float(np.mean([q.lhs for q in pairs])),
                          float(np.mean([q.rhs for q in pairs])), disc, pairs, rejections)


# ---------------------------------------------------------------------------
# end-to-end

@dataclass(frozen=True)
class EndToEndRow:
    k: int
    xi: float
    p_hat: MCEstimate
    ratio: float
    ratio_se: float


def end_to_end_ratio(k_list: Iterable[int], n_samples: int, seed=0, **kw) -> list[EndToEndRow]:
    """p_hat(k) k^delta (log k)^(3/2) for each k, with p_hat from direct simulation."""
    rows = []
    for k in k_list:
        k = int(k)
        if k < 2:
            raise DomainError("end-to-end ratios need k >= 2")
        est = permlab.pk_mc(k, n_samples, seed, **kw)
        scale = k ** CONSTANTS.delta * math.log(k) ** 1.5
        rows.append(EndToEndRow(k, CONSTANTS.xi(k), est, est.mean * scale, est.std_error * scale))
    return rows
