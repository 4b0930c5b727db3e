import math

import numpy as np
import pytest
from scipy import integrate, special

from permsums import gfun
from permsums.errors import DomainError

LOG2 = math.log(2)


def exact_days(k):
    """Expected number of days with exactly one survivor, by summing over days."""
    return math.fsum(k * 2.0 ** -d * (1 - 2.0 ** -d) ** (k - 1) for d in range(400))


def test_g_hat_frozen():
    g0 = gfun.g_hat(0)
    assert g0.real == pytest.approx(5.1278218186, abs=1e-8)
    assert abs(g0.imag) < 1e-14
    assert abs(gfun.g_hat(1)) == pytest.approx(2.4479026947e-7, rel=1e-6)


def test_g_hat_is_mean_of_g():
    val, _ = integrate.quad(gfun.g_eval, 0, 1, epsabs=1e-13)
    assert val == pytest.approx(gfun.g_hat(0).real, rel=1e-12)


def test_g_hat_against_scipy_gamma():
    for m in range(0, 4):
        s = complex(gfun.SIGMA, gfun.OMEGA * m)
        assert gfun.g_hat(m) == pytest.approx(-special.gamma(s) / LOG2, rel=1e-12)


def test_g_hat_conjugate_symmetry_and_decay():
    for m in range(1, 11):
        assert gfun.g_hat(-m) == pytest.approx(np.conj(gfun.g_hat(m)), rel=1e-13)
        assert abs(gfun.g_hat(m)) < gfun.decay_bound(m)
    assert gfun.g_hat(64) == 0.0 or abs(gfun.g_hat(64)) < 1e-250
    with pytest.raises(DomainError):
        gfun.g_hat(65)


@pytest.mark.parametrize("m", [0, 1, 2, 5])
def test_strip_oracle_matches_gamma(m):
    s = complex(gfun.SIGMA, gfun.OMEGA * m)
    ref = -LOG2 * gfun.g_hat(m)  # Gamma(s)
    assert abs(gfun.gamma_strip_oracle(s) + ref) < 1e-8 * max(1.0, abs(ref))


def test_strip_oracle_domain():
    with pytest.raises(DomainError):
        gfun.gamma_strip_oracle(0.2)
    with pytest.raises(DomainError):
        gfun.gamma_strip_oracle(complex(-1.5, 1.0))


def test_g_periodic_and_near_constant():
    x = np.linspace(0, 1, 501)
    np.testing.assert_allclose(gfun.g_eval(x + 1), gfun.g_eval(x), rtol=1e-14)
    np.testing.assert_allclose(gfun.g_eval(x - 3), gfun.g_eval(x), rtol=1e-14)
    assert gfun.g_ratio(20_000) == pytest.approx(1.9095e-7, rel=1e-3)
    assert gfun.g_ratio(20_000) <= 2e-7


def test_g_eval_frozen():
    assert gfun.g_eval(0.0) == pytest.approx(5.127822300550249, rel=1e-14)
    assert gfun.g_eval(0.3) == pytest.approx(5.127821751686676, rel=1e-14)


def test_fourier_table_reconstructs_g():
    tab = gfun.FourierTable.build(3)
    assert tab.modes.tolist() == [-3, -2, -1, 0, 1, 2, 3]
    assert tab[-2] == pytest.approx(np.conj(tab[2]))
    x = np.linspace(0, 1, 1001)
    assert np.abs(tab.reconstruct(x) - gfun.g_eval(x)).max() < 1e-12
    assert tab.tail_bound() < 1e-20
    with pytest.raises(KeyError):
        tab[4]
    with pytest.raises(DomainError):
        gfun.FourierTable.build(-1)


def test_parseval():
    tab = gfun.FourierTable.build(5)
    x = np.arange(4096) / 4096
    mean_sq = float(np.mean(gfun.g_eval(x) ** 2))
    assert mean_sq == pytest.approx(float(np.sum(np.abs(tab.coeffs) ** 2)), rel=1e-14)


@pytest.mark.parametrize("lam,xi", [(2.0, 0.0), (0.37, 0.5), (5.5, 0.81), (1.0, 0.2)])
def test_g_lambda_transformation(lam, xi):
    res = gfun.g_lambda_eval(lam, xi)
    assert res.discrepancy < 1e-12
    if lam == 1.0:
        assert res.direct == pytest.approx(gfun.g_eval(xi), rel=1e-15)


def test_g_lambda_domain():
    with pytest.raises(DomainError):
        gfun.g_lambda_eval(0.0, 0.1)
    with pytest.raises(DomainError):
        gfun.g_lambda_eval(float("inf"), 0.1)


def test_g0_values_and_integral():
    assert gfun.g0_eval(0.0) == pytest.approx(1.442704206673724, rel=1e-14)
    assert isinstance(gfun.g0_eval(0.25), float)
    val, _ = integrate.quad(gfun.g0_eval, 0, 1, epsabs=1e-14)
    assert abs(val - 1 / LOG2) < 1e-10
    np.testing.assert_allclose(gfun.g0_eval(np.array([0.1, 1.1, -0.9])), gfun.g0_eval(0.1), rtol=1e-14)


def test_days_at_one_converge_to_g0():
    # the exact finite-k expectation approaches g0(log2 k) from the day-sum formula
    assert exact_days(2 ** 16) == pytest.approx(gfun.g0_eval(0.0), abs=1e-8)
    assert exact_days(3 * 2 ** 14) == pytest.approx(gfun.g0_eval(math.log2(3)), abs=1e-8)


def test_thinning_days_mc_matches_exact():
    for k in (1, 2, 16):
        est = gfun.thinning_days_mc(k, 200_000, seed=3)
        assert est.within(exact_days(k), 4.0)


def test_thinning_hit_probability_is_half_the_days():
    # a lone survivor stays alone for a Geometric(1/2) number of days (mean 2)
    for k in (1, 2, 16, 2 ** 10):
        est = gfun.thinning_mc(k, 200_000, seed=4)
        assert est.within(exact_days(k) / 2, 4.0)


def test_thinning_frozen_and_domain():
    assert gfun.thinning_mc(16, 200_000, 3).mean == 0.72081
    assert gfun.thinning_days_mc(16, 200_000, 3).mean == 1.447395
    with pytest.raises(DomainError):
        gfun.thinning_mc(0, 10)
