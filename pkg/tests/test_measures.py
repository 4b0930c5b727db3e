import math

import numpy as np
import pytest

from permsums import measures as ms
from permsums import gfun
from permsums.errors import CapacityError, DomainError
from permsums.permlab import CONSTANTS
from permsums.rngkit import StreamSeed
from permsums.walks import Walk


def test_conjugate_symmetry_from_shared_sample():
    tab = ms.mu_hat_table([-2, -1, 0, 1, 2], ell=10, n_samples=3000, seed=1)
    for r in (1, 2):
        assert tab[-r].value == np.conj(tab[r].value)
    assert tab[0].imag.mean == 0.0
    tab2 = ms.mu_prime_hat_table([-1, 1], ell=12, n_samples=3000, seed=1)
    assert tab2[-1].value == np.conj(tab2[1].value)


def test_functional_path_matches_fourier_path():
    one = ms.mu_functional_mc(lambda t: np.ones_like(t), "mu", ell=10, n_samples=4000, seed=2)
    r0 = ms.mu_hat_mc(0, ell=10, n_samples=4000, seed=2)
    assert one.mean == pytest.approx(r0.real.mean, abs=1e-12)
    cos = ms.mu_functional_mc(lambda t: np.cos(2 * np.pi * t), "mu-prime", ell=12, n_samples=4000, seed=2)
    r1 = ms.mu_prime_hat_mc(1, ell=12, n_samples=4000, seed=2)
    assert cos.mean == pytest.approx(r1.real.mean, abs=1e-12)


def test_engines_give_identical_estimates():
    a = ms.mu_hat_table([0, 1], ell=9, n_samples=2000, seed=3, engine="brute")
    b = ms.mu_hat_table([0, 1], ell=9, n_samples=2000, seed=3, engine="mitm")
    assert a[1].value == b[1].value
    c = ms.mu_prime_hat_table([0], ell=12, n_samples=2000, seed=3, engine="brute")
    d = ms.mu_prime_hat_table([0], ell=12, n_samples=2000, seed=3, engine="split")
    assert c[0].value == d[0].value


def test_tau_statistic_lies_in_unit_interval():
    pairs = ms.draw_pairs("mu-prime", 14, 3000, seed=4)
    w, L = pairs[:, 0], pairs[:, 1]
    assert np.all(w >= 0)
    live = w > 0
    assert live.any()
    assert np.all(L[live] <= 0.0) and np.all(np.isfinite(L[live]))
    # the weighted power stat^c never falls below stat itself
    assert np.all(np.exp2(CONSTANTS.c * L[live]) >= np.exp2(L[live]))


def test_rho_weights():
    pairs = ms.draw_pairs("mu", 10, 3000, seed=5)
    w = pairs[:, 0]
    assert np.all((w >= 0) & (w < 10))
    # w > 0 iff the l-th arrival is before l; that is P(Gamma(l, 1) < l)
    from scipy import stats
    p = stats.gamma.cdf(10, 10)
    assert abs(np.mean(w > 0) - p) < 5 * math.sqrt(p * (1 - p) / w.size)


def test_zero_modes_positive_small_scale():
    mu0 = ms.mu_hat_mc(0, ell=12, n_samples=20_000, seed=6)
    mp0 = ms.mu_prime_hat_mc(0, ell=16, n_samples=20_000, seed=6)
    assert mu0.real.mean > 5 * mu0.real.std_error
    assert mp0.real.mean > 5 * mp0.real.std_error


def test_reproducible_across_threads():
    a = ms.mu_prime_hat_mc(1, ell=12, n_samples=2000, seed=7, threads=1)
    b = ms.mu_prime_hat_mc(1, ell=12, n_samples=2000, seed=7, threads=4)
    assert a.value == b.value and a.std_error == b.std_error


def test_capacity_and_domain_errors():
    with pytest.raises(CapacityError):
        ms.mu_hat_mc(0, ell=53, n_samples=10)
    with pytest.raises(CapacityError):
        ms.mu_prime_hat_mc(0, ell=ms.TAU_ELL_MAX + 1, n_samples=10)
    with pytest.raises(DomainError):
        ms.mu_hat_mc(0, ell=10, n_samples=0)
    with pytest.raises(DomainError):
        ms.mu_hat_table([], ell=10, n_samples=10)
    with pytest.raises(DomainError):
        ms.mu_functional_mc(np.cos, "nu")


def test_predict_f_with_point_masses():
    # mu = mu' = uniform measure: only mode 0 survives and f is the constant c0 g_hat(0)
    pf = ms.predict_f({0: 1.0}, {0: 1.0})
    np.testing.assert_allclose(pf.f, CONSTANTS.c0 * gfun.g_hat(0).real, rtol=1e-14)
    assert pf.f[0] == pytest.approx(4.7885778, rel=1e-7)
    assert pf.modes.tolist() == [0]
    assert pf.max_imag == 0.0


def test_predict_f_conjugate_fill_and_realness():
    mu = {0: 1.0, 1: 0.3 + 0.2j, 2: 0.05j}
    mp = {0: 0.9, 1: 0.1 - 0.4j, 2: 0.02}
    pf = ms.predict_f(mu, mp, xi=[0.0, 0.25, 0.5])
    assert pf.modes.tolist() == [-2, -1, 0, 1, 2]
    assert pf.max_imag < 1e-15
    tab = gfun.FourierTable.build(2)
    direct = []
    for x in (0.0, 0.25, 0.5):
        tot = 0
        for m in range(-2, 3):
            a = mu[abs(m)] if m >= 0 else np.conj(mu[-m])
            b = mp[abs(m)] if m >= 0 else np.conj(mp[-m])
            tot += CONSTANTS.c0 * tab[m] * a * b * np.exp(2j * np.pi * m * x)
        direct.append(tot.real)
    np.testing.assert_allclose(pf.f, direct, rtol=1e-13)
    with pytest.raises(DomainError):
        ms.predict_f({0: 1.0, 1: 0.1}, {0: 1.0, 3: 0.0}, M=2)


def test_predict_f_error_budget_from_estimates():
    mu = ms.mu_hat_table([0, 1], ell=10, n_samples=3000, seed=8)
    mp = ms.mu_prime_hat_table([0, 1], ell=12, n_samples=3000, seed=8)
    pf = ms.predict_f(mu, mp)
    assert pf.stat_error > 0 and pf.truncation_error >= 0
    assert pf.error_budget == pf.stat_error + pf.truncation_error
    assert set(pf.to_dict()) >= {"xi", "f", "modes", "stat_error"}


def test_paradigm_pair_is_deterministic_and_bounded():
    k = 2 ** 14
    beta = Walk.from_increments("upper", [1, 0, 1, -1, 0, 2, 0])
    beta_p = Walk.from_increments("lower", [0, 1, -1, 0, 0, 1, 0])
    h1, r1 = ms.paradigm_pair(k, beta, beta_p, 7, 40, StreamSeed(9))
    h2, r2 = ms.paradigm_pair(k, beta, beta_p, 7, 40, StreamSeed(9))
    np.testing.assert_array_equal(h1, h2)
    np.testing.assert_array_equal(r1, r2)
    assert set(np.unique(h1)) <= {0.0, 1.0}
    assert np.all((r1 >= 0) & (r1 <= 1))


def test_paradigm_rhs_grows_with_discrepancy():
    # same arrivals upstairs, and a lower walk that ends lower gives a larger D
    k = 2 ** 14
    beta = Walk.from_increments("upper", [1, 0, 1, -1, 0, 2, 0])
    hi = Walk.from_increments("lower", [1, 1, 0, 0, 0, 0, 0])
    lo = Walk.from_increments("lower", [1, 1, 0, 0, 0, -1, -1])
    _, r_hi = ms.paradigm_pair(k, beta, hi, 5, 200, StreamSeed(10))
    _, r_lo = ms.paradigm_pair(k, beta, lo, 5, 200, StreamSeed(10))
    # cells 1..5 match, so tau* at l = 5 is the same trial by trial
    assert np.all(r_lo >= r_hi)
    assert r_lo.mean() > r_hi.mean()


def test_poisson_paradigm_check_small():
    rep = ms.poisson_paradigm_check(2 ** 14, n_walk_pairs=6, n_inner=30, ell=20, seed=0)
    assert rep.ell_used == 7 and rep.ell_requested == 20
    assert len(rep.pairs) == 6
    assert rep.passed
    d = rep.to_dict()
    assert d["passed"] is True and d["ell_used"] == 7
    with pytest.raises(DomainError):
        ms.poisson_paradigm_check(2 ** 13)


def test_end_to_end_rows():
    rows = ms.end_to_end_ratio([2 ** 8, 3 * 2 ** 8], 20_000, seed=1)
    assert [r.k for r in rows] == [256, 768]
    r = rows[1]
    scale = r.k ** CONSTANTS.delta * math.log(r.k) ** 1.5
    assert r.ratio == pytest.approx(r.p_hat.mean * scale)
    assert r.xi == pytest.approx(math.log2(1.5))
    with pytest.raises(DomainError):
        ms.end_to_end_ratio([1], 10)
