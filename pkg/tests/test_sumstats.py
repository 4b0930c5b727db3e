import itertools
import math

import numpy as np
import pytest

from permsums import processes as pr
from permsums import sumstats as ss
from permsums.errors import CapacityError, DomainError
from permsums.rngkit import StreamSeed
from permsums.sumstats import RhoInput, TauInput


def rho_oracle(u, w):
    """Float enumeration; returns None when some sum sits too close to a window end."""
    terms = [2.0 ** -x for x in u]
    lo, hi = 1 - 2.0 ** -w, 1.0
    cnt = 0
    for eps in itertools.product((0, 1), repeat=len(terms)):
        s = math.fsum(t for e, t in zip(eps, terms) if e)
        if min(abs(s - lo), abs(s - hi)) < 1e-9 and not (s == lo or s == hi):
            return None
        cnt += lo <= s <= hi
    return cnt


def distinct_sums(x):
    sums = {0}
    for v in x:
        sums |= {s + v for s in sums}
    return len(sums)


def test_rho_frozen_dyadic_case():
    # sums of {1/2, 1/2, 1/4} in [1/2, 1]: 1/2 twice, 3/4 twice, 1 once
    inp = RhoInput([1.0, 1.0, 2.0], w=1.0, z=0.0)
    for engine in ("brute", "mitm", "auto"):
        assert ss.rho_raw_count(inp, engine) == 5
    assert ss.rho_count(RhoInput([1.0, 1.0, 2.0], w=1.0, z=-2.0)) == 1.25


def test_rho_engines_match_oracle(rng):
    checked = 0
    for _ in range(400):
        m = int(rng.integers(1, 13))
        u = rng.uniform(0.05, 6.0, m)
        w = float(rng.uniform(0.5, 5.0))
        ref = rho_oracle(u, w)
        if ref is None:
            continue
        inp = RhoInput(u, w=w, z=0.0)
        assert ss.rho_raw_count(inp, "brute") == ref
        assert ss.rho_raw_count(inp, "mitm") == ref
        checked += 1
    assert checked > 350


def test_rho_brute_equals_mitm_at_larger_m(rng):
    for _ in range(30):
        m = int(rng.integers(14, 21))
        inp = RhoInput(rng.exponential(2.0, m) + 0.01, w=float(rng.uniform(1, 8)), z=0.0)
        assert ss.rho_raw_count(inp, "brute") == ss.rho_raw_count(inp, "mitm")


def test_rho_input_validation_and_capacity():
    with pytest.raises(DomainError):
        RhoInput([0.0, 1.0], w=1.0, z=0.0)
    with pytest.raises(DomainError):
        RhoInput([1.0], w=1.0, z=0.0, mode="odd")
    with pytest.raises(CapacityError):
        ss.rho_raw_count(RhoInput(np.ones(27), w=1.0, z=0.0), "brute")
    with pytest.raises(CapacityError):
        ss.rho_raw_count(RhoInput(np.ones(53), w=1.0, z=0.0), "mitm")
    with pytest.raises(DomainError):
        ss.rho_raw_count(RhoInput([1.0], w=1.0, z=0.0), "quantum")


def test_tau_small_cases():
    assert ss.tau_raw_count(TauInput([1, 2, 3], 0)) == 7
    assert ss.tau_raw_count(TauInput([1, 1, 1], 0)) == 4
    assert ss.tau_raw_count(TauInput([], 0)) == 1
    assert ss.tau_count(TauInput([1, 2, 4], -3)) == 1.0


@pytest.mark.parametrize("engine", ["brute", "bitset", "split"])
def test_tau_engines_match_set_oracle(engine, rng):
    for _ in range(300):
        m = int(rng.integers(0, 14))
        x = rng.integers(1, int(rng.choice([4, 50, 5000])), m)
        assert ss.tau_raw_count(TauInput(x, 0), engine) == distinct_sums(x.tolist())


def test_tau_split_on_lacunary_values():
    # values like those of the lower process: heavy repetition of small ones, sparse large ones
    for seed in range(20):
        proc = pr.sample_lower_process(30, StreamSeed(31, seed))
        x = np.sort(proc.x)[:22]
        assert ss.tau_raw_count(TauInput(x, 0), "split") == ss.tau_raw_count(TauInput(x, 0), "brute")


def test_tau_capacity_errors():
    with pytest.raises(CapacityError):
        ss.tau_raw_count(TauInput(np.arange(1, 26), 0), "brute")
    with pytest.raises(CapacityError):
        ss.tau_raw_count(TauInput([2 ** 37], 0), "bitset")
    with pytest.raises(DomainError):
        TauInput([0, 1], 0)


def test_tau_prefix_counts(rng):
    for _ in range(200):
        x = rng.integers(1, 300, int(rng.integers(0, 12)))
        expect = [distinct_sums(x[:j].tolist()) for j in range(x.size + 1)]
        np.testing.assert_array_equal(ss.tau_prefix_counts(x), expect)


def test_tau_star_identity_and_bounds():
    for seed in range(200):
        proc = pr.sample_lower_process(20, StreamSeed(13, seed))
        beta = proc.walk.values
        for ell in range(0, 21):
            star = ss.tau_star(proc, ell)
            assert 0.0 < star <= 1.0
            if ell - beta[ell] <= proc.x.size:
                assert star == ss.tau_unstar(proc, ell - int(beta[ell]))


def test_tau_unstar_domain():
    proc = pr.sample_lower_process(5, StreamSeed(0))
    with pytest.raises(DomainError):
        ss.tau_unstar(proc, proc.x.size + 1)
    with pytest.raises(DomainError):
        ss.tau_star(proc, 6)


def test_rho_unstar_agrees_with_plain_definition():
    agree = 0
    for seed in range(200):
        proc = pr.sample_upper_process(30, StreamSeed(17, seed))
        u = proc.sorted_arrivals()
        for ell in (3, 8, 14):
            if u.size < ell:
                continue
            val, info = ss.rho_unstar(proc, ell, return_info=True)
            if not info.clamped:
                assert val == pytest.approx(ss.rho_plain(u, ell), rel=1e-12)
                agree += 1
    assert agree > 400


def test_rho_star_edge_cases():
    proc = pr.sample_upper_process(10, StreamSeed(1))
    assert ss.rho_star(proc, 0) == 1.0
    assert ss.rho_star(proc, 10) >= 0.0
    with pytest.raises(DomainError):
        ss.rho_star(proc, 11)
    with pytest.raises(DomainError):
        ss.rho_unstar(proc, 0)
