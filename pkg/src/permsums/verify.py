"""Acceptance suite shared by the test-suite and ``permlab verify-all``.

Each criterion returns a :class:`CriterionResult` whose ``checks`` list the
individual measured quantities.  Sample counts are the full ones at
``scale=1``; smaller scales shrink them (never below a floor) to fit a time
budget.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate

from . import gfun, measures, permlab, sumstats, walks
from .errors import DomainError
from .processes import phi, sample_lower_process

# rough wall time of the full suite on one core, used to map a budget to a scale
FULL_SUITE_SECONDS = 600.0


@dataclass
class Check:
    name: str
    value: object
    target: object
    ok: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "value": _plain(self.value), "target": _plain(self.target),
                "ok": bool(self.ok)}


@dataclass
class CriterionResult:
    id: int
    title: str
    status: str  # "pass", "fail" or "info"
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def line(self) -> str:
        bad = [c.name for c in self.checks if not c.ok]
        tail = f" (failing: {', '.join(bad)})" if bad else ""
        return f"[{self.status.upper():4}] criterion {self.id:2d}: {self.title}{tail}"

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "status": self.status,
                "seconds": self.seconds, "checks": [c.to_dict() for c in self.checks]}


def _plain(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _n(full: int, scale: float, floor: int) -> int:
    return max(int(floor), int(round(full * min(1.0, scale))))


def _mc_check(name, est, target, n_sigma, slack=0.0) -> Check:
    return Check(name, {"mean": est.mean, "std_error": est.std_error, "n": est.n_samples},
                 target, est.within(target, n_sigma, slack))


# ---------------------------------------------------------------------------
# criteria

def p3_case_oracle() -> float:
    """p(3) by listing the ways to write 3: {3}, {1, 2}, {1, 1, 1}.

    With a_i ~ Pois(1/i) independent, 3 is missed iff a_3 = 0 and neither
    (a_1 >= 1 and a_2 >= 1) nor a_1 >= 3.
    """
    p_a1_0 = math.exp(-1.0)
    p_a1_12 = math.exp(-1.0) * (1.0 + 0.5)
    miss_12 = p_a1_0 + p_a1_12 * math.exp(-0.5)
    return 1.0 - math.exp(-1.0 / 3.0) * miss_12


def c1_exact(scale=1.0, seed=0) -> list[Check]:
    out = []
    for k, target in ((1, 1.0 - math.exp(-1.0)), (2, 1.0 - 2.0 * math.exp(-1.5)), (3, p3_case_oracle())):
        v = permlab.pk_exact_small(k)
        out.append(Check(f"p({k})", v, target, abs(v - target) <= 1e-12))
    return out


def c2_ink(scale=1.0, seed=0) -> list[Check]:
    exact = permlab.i_nk_exact(4, 2)
    est = permlab.i_nk_mc(4, 2, _n(10 ** 6, scale, 10 ** 4), seed)
    return [Check("i(4,2) exact", exact, Fraction(5, 12), exact == Fraction(5, 12)),
            _mc_check("i(4,2) MC", est, 5 / 12, 4.0)]


def c3_pk_mc(scale=1.0, seed=0) -> list[Check]:
    n = _n(10 ** 6, scale, 10 ** 4)
    return [_mc_check(f"p({k}) MC", permlab.pk_mc(k, n, seed), permlab.pk_exact_small(k), 4.0)
            for k in range(1, 13)]


def c4_gfun(scale=1.0, seed=0) -> list[Check]:
    g0 = gfun.g_hat(0)
    g1 = abs(gfun.g_hat(1))
    out = [Check("g_hat(0)", g0, 5.1278218186, abs(g0 - 5.1278218186) <= 1e-8),
           Check("|g_hat(1)|", g1, 2.4479026947e-7, abs(g1 / 2.4479026947e-7 - 1.0) <= 1e-6)]
    ratios = [abs(gfun.g_hat(m)) / gfun.decay_bound(m) for m in range(1, 11)]
    out.append(Check("|g_hat(m)| / decay bound, m=1..10", max(ratios), "< 1", max(ratios) < 1.0))
    r = gfun.g_ratio(10 ** 5)
    out.append(Check("max g / min g - 1", r, 2e-7, r <= 2e-7))
    for m in (0, 1, 2):
        s = complex(gfun.SIGMA, gfun.OMEGA * m)
        rec = -gfun.LOG2 * gfun.g_hat(m)  # Gamma(s) from the recurrence path
        quad = -gfun.gamma_strip_oracle(s)
        out.append(Check(f"Gamma recurrence vs strip quadrature, m={m}", abs(rec - quad), 1e-8,
                         abs(rec - quad) <= 1e-8))
    return out


def c5_walk_constants(scale=1.0, seed=0) -> list[Check]:
    n = _n(10 ** 6, scale, 2 * 10 ** 4)
    out = []
    for m in (0, 1, 3):
        target = walks.h_closed_form("upper", m)
        est = walks.h_estimate("upper", m, 10 ** 4, n, seed)
        out.append(_mc_check(f"h({m})", est, target, 3.0, 0.05 * target))
    target = walks.h_closed_form("lower", 0)
    est = walks.h_estimate("lower", 0, 10 ** 4, n, seed)
    out.append(_mc_check("h'(0)", est, target, 3.0, 0.05 * target))
    lad = walks.ladder_and_renewal_check(_n(10 ** 6, scale, 5 * 10 ** 4), seed)
    out.append(_mc_check("E Z+", lad.upper.mean_Z_plus, math.e / 2.0, 3.0))
    u40, se40 = lad.renewal_at(40)
    out.append(Check("renewal sum at m=40", {"mean": u40, "std_error": se40}, 2.0 / math.e,
                     abs(u40 - 2.0 / math.e) <= 0.01 + 3.0 * se40))
    b = walks.borel_identity_check(10 ** 6)
    out.append(Check("Borel partial sum, 1e6 terms", b, [0.9984, 1.0], 0.9984 <= b <= 1.0))
    return out


def c6_llt(scale=1.0, seed=0) -> list[Check]:
    n = _n(10 ** 6, scale, 10 ** 5)
    tv = {N: walks.llt_check("upper", 0, N, n, seed, method="exact").tv_distance
          for N in (400, 1600, 6400)}
    return [Check("TV at N=1600", tv[1600], 0.03, tv[1600] <= 0.03),
            Check("TV(6400) < TV(400)", [tv[6400], tv[400]], "decreasing", tv[6400] < tv[400])]


def c7_thinning(scale=1.0, seed=0) -> list[Check]:
    est = gfun.thinning_mc(2 ** 16, _n(10 ** 6, scale, 10 ** 4), seed)
    out = [_mc_check("thinning_mc(2^16) vs g0(0)", est, gfun.g0_eval(0.0), 3.0)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val = integrate.quad(gfun.g0_eval, 0.0, 1.0, epsabs=1e-14, epsrel=1e-14)[0]
    out.append(Check("integral of g0", val, 1.0 / gfun.LOG2, abs(val - 1.0 / gfun.LOG2) <= 1e-10))
    return out


def _subset_sums(x: np.ndarray) -> np.ndarray:
    s = np.zeros(1, dtype=np.int64)
    for v in x:
        s = np.concatenate((s, s + v))
    return s


def c8_equivalence(scale=1.0, seed=0) -> list[Check]:
    n_cases = _n(10 ** 4, scale, 500)
    rng = np.random.default_rng([seed, 8])
    rho_bad = tau_bad = hit_bad = 0
    for _ in range(n_cases):
        m = int(rng.integers(1, 21))
        u = np.cumsum(rng.exponential(1.0, m))
        if rng.random() < 0.5:
            inp = sumstats.RhoInput(u, w=float(u[-1]), z=0.0)
        else:
            inp = sumstats.RhoInput(u, w=float(rng.uniform(0.5, 8.0)), z=0.0, mode="star")
        if sumstats.rho_raw_count(inp, "brute") != sumstats.rho_raw_count(inp, "mitm"):
            rho_bad += 1
        m = int(rng.integers(1, 21))
        if rng.random() < 0.5:
            # redraw the rare samples whose sum overflows the bitset capacity
            while True:
                x = np.asarray(phi(np.cumsum(rng.exponential(1.0, m))), dtype=np.int64)
                if int(x.sum()) <= sumstats.CAPACITY.tau_bitset_sum:
                    break
        else:
            x = rng.integers(1, int(rng.choice([4, 64, 4096])), m)
        t = sumstats.TauInput(x, 0.0)
        if sumstats.tau_raw_count(t, "brute") != sumstats.tau_raw_count(t, "bitset"):
            tau_bad += 1
        m = int(rng.integers(1, 21))
        k = int(rng.integers(2, 5000))
        vals = rng.integers(1, k + 1, m)
        target = k if rng.random() < 0.5 else int(rng.integers(1, int(vals.sum()) + 2))
        if permlab.subset_sum_hits(vals, target) != bool(np.any(_subset_sums(vals) == target)):
            hit_bad += 1
    tv = walks.h_transform_tv(0, 16, _n(10 ** 6, scale, 10 ** 5), seed)
    return [Check("rho brute == MITM", rho_bad, 0, rho_bad == 0),
            Check("tau brute == bitset", tau_bad, 0, tau_bad == 0),
            Check("subset_sum_hits == enumeration", hit_bad, 0, hit_bad == 0),
            Check("TV(Doob, omega-rejection), m=0, N=16", tv.tv_distance, 0.01, tv.tv_distance <= 0.01)]


def c9_identities(scale=1.0, seed=0) -> list[Check]:
    n_draws = _n(10 ** 5, scale, 2000)
    root = np.random.SeedSequence([seed, 9])
    gen = np.random.Generator(np.random.Philox(root))
    L = 12
    ident_bad = mono_bad = 0
    for _ in range(n_draws):
        proc = sample_lower_process(L, gen)
        ell = int(gen.integers(1, L + 1))
        lp = ell - int(proc.walk.values[ell])
        if sumstats.tau_star(proc, ell) != sumstats.tau_unstar(proc, lp):
            ident_bad += 1
        # tau over prefixes of the sorted values, and tau* over cells
        order = np.argsort(proc.s, kind="stable")
        counts = sumstats.tau_prefix_counts(proc.x[order]).astype(float)
        tau = counts * np.exp2(-np.arange(counts.size))
        cells = np.searchsorted(proc.s[order], np.arange(L + 1), side="right")
        star = tau[cells]
        if np.any(np.diff(tau) > 0) or np.any(np.diff(star) > 0):
            mono_bad += 1
    lam_err = max(gfun.g_lambda_eval(lam, xi).discrepancy
                  for lam, xi in ((2.0, 0.0), (2.0, 0.3), (2.0, 0.77), (0.37, 0.5)))
    x = np.linspace(0.0, 1.0, 2001)
    rec_err = float(np.abs(gfun.FourierTable.build(3).reconstruct(x) - gfun.g_eval(x)).max())
    return [Check("tau*(l) == tau(l - beta'(l))", ident_bad, 0, ident_bad == 0),
            Check("tau and tau* monotone", mono_bad, 0, mono_bad == 0),
            Check("g_lambda transformation identity", lam_err, 1e-12, lam_err <= 1e-12),
            Check("Fourier reconstruction of g", rec_err, 1e-12, rec_err <= 1e-12)]


def c10_positivity(scale=1.0, seed=0) -> list[Check]:
    n = _n(10 ** 5, scale, 5000)
    out = []
    for name, est in (("mu_hat(0)", measures.mu_hat_mc(0, 24, n, seed)),
                      ("mu'_hat(0)", measures.mu_prime_hat_mc(0, 24, n, seed))):
        z = est.real.mean / est.real.std_error if est.real.std_error > 0 else 0.0
        out.append(Check(f"{name} significance", {"mean": est.real.mean,
                                                 "std_error": est.real.std_error, "z": z},
                         ">= 5 sigma", z >= 5.0 and est.imag.mean == 0.0))
    return out


def c11_exploratory(scale=1.0, seed=0) -> list[Check]:
    com = permlab.change_of_measure_check(2 ** 10, _n(10 ** 6, scale, 10 ** 4), seed)
    out = [Check("change of measure ratio at k=2^10", com.ratio, [0.7, 1.3], 0.7 <= com.ratio <= 1.3)]
    par = measures.poisson_paradigm_check(2 ** 18, _n(50, scale, 10), _n(200, scale, 20), 20, seed)
    out.append(Check("paradigm |LHS - RHS| at k=2^18",
                     {"mean": par.discrepancy.mean, "std_error": par.discrepancy.std_error,
                      "ell_used": par.ell_used}, "0.1 + 3 sigma", par.passed))
    rows = measures.end_to_end_ratio([2 ** 10, 2 ** 12, 2 ** 14], _n(10 ** 6, scale, 10 ** 4), seed)
    ok = True
    for a in rows:
        for b in rows:
            if a.k < b.k:
                ok &= abs(a.ratio - b.ratio) <= 0.15 * min(a.ratio, b.ratio) + 3.0 * math.hypot(a.ratio_se, b.ratio_se)
    out.append(Check("end-to-end ratios at xi=0 pairwise within 15% + 3 sigma",
                     [r.ratio for r in rows], "pairwise", ok))
    return out


CRITERIA: list[tuple[int, str, Callable, bool]] = [
    (1, "exact p(1), p(2), p(3)", c1_exact, True),
    (2, "i(4,2) exact and Monte Carlo", c2_ink, True),
    (3, "pk_mc agrees with pk_exact for k = 1..12", c3_pk_mc, True),
    (4, "g-function values, decay and oracle agreement", c4_gfun, True),
    (5, "walk constants h, h', E Z+, renewal, Borel", c5_walk_constants, True),
    (6, "local limit TV distance and trend", c6_llt, True),
    (7, "binomial thinning and the integral of g0", c7_thinning, True),
    (8, "oracle-equivalence suites", c8_equivalence, True),
    (9, "identity suites", c9_identities, True),
    (10, "measure positivity", c10_positivity, True),
    (11, "exploratory trend checks", c11_exploratory, False),
]


def run_criterion(cid: int, scale: float = 1.0, seed: int = 0) -> CriterionResult:
    for i, title, fn, gating in CRITERIA:
        if i == cid:
            t0 = time.perf_counter()
            checks = fn(scale, seed)
            ok = all(c.ok for c in checks)
            status = ("pass" if ok else "fail") if gating else "info"
            return CriterionResult(i, title, status, checks, time.perf_counter() - t0)
    raise KeyError(cid)


def verify_all(budget_seconds: float = FULL_SUITE_SECONDS, only=None, seed: int = 0,
               progress: Callable[[CriterionResult], None] | None = None) -> list[CriterionResult]:
    if budget_seconds < 60:
        raise DomainError("verify-all needs a budget of at least 60 seconds")
    scale = min(1.0, budget_seconds / FULL_SUITE_SECONDS)
    ids = [c[0] for c in CRITERIA] if only is None else [int(i) for i in only]
    results = []
    for cid in ids:
        res = run_criterion(cid, scale, seed)
        results.append(res)
        if progress is not None:
            progress(res)
    return results
