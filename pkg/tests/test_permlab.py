import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from permsums import permlab
from permsums.errors import CapacityError, DomainError
from permsums.permlab import CONSTANTS, CycleType
from permsums.rngkit import StreamSeed

PK_FROZEN = [0.6321205588285577, 0.5537396797031402, 0.49658324276473237,
             0.4695577300287325, 0.4414577048672489, 0.4250587022635102, 0.4084811305017004]


def brute_ink(n, k):
    """Fraction of permutations of [n] with an invariant k-set, by enumeration."""
    good = 0
    total = 0
    for perm in itertools.permutations(range(n)):
        total += 1
        seen = [False] * n
        lengths = []
        for s in range(n):
            if not seen[s]:
                c, t = 0, s
                while not seen[t]:
                    seen[t] = True
                    t = perm[t]
                    c += 1
                lengths.append(c)
        good += any(sum(sub) == k for r in range(len(lengths) + 1)
                    for sub in itertools.combinations(lengths, r))
    return Fraction(good, total)


def test_constants():
    l2 = math.log(2)
    assert CONSTANTS.delta == pytest.approx(1 - (1 + math.log(l2)) / l2, rel=1e-15)
    assert CONSTANTS.delta == pytest.approx(0.08607133205593431, rel=1e-15)
    assert CONSTANTS.c == pytest.approx(0.5287663729448977, rel=1e-15)
    assert CONSTANTS.c0 == pytest.approx(0.9338424707434079, rel=1e-15)
    assert CONSTANTS.n(1) == 0 and CONSTANTS.n(1023) == 9 and CONSTANTS.n(1024) == 10
    assert CONSTANTS.xi(1024) == 0.0
    assert CONSTANTS.xi(3 * 2 ** 10) == pytest.approx(math.log2(1.5), rel=1e-14)
    with pytest.raises(DomainError):
        CONSTANTS.n(0)


def test_pk_exact_closed_forms():
    assert permlab.pk_exact_small(1) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert permlab.pk_exact_small(2) == pytest.approx(1 - 2 * math.exp(-1.5), abs=1e-12)


def test_pk_exact_frozen():
    got = [permlab.pk_exact_small(k) for k in range(1, 8)]
    np.testing.assert_allclose(got, PK_FROZEN, rtol=0, atol=1e-15)


def test_pk_exact_decreasing_and_capacity():
    vals = [permlab.pk_exact_small(k) for k in range(1, 15)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(CapacityError):
        permlab.pk_exact_small(permlab.PK_EXACT_MAX_K + 1)
    with pytest.raises(DomainError):
        permlab.pk_exact_small(0)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_ink_exact_matches_enumeration(n):
    for k in range(n + 1):
        assert permlab.i_nk_exact(n, k) == brute_ink(n, k)


def test_ink_exact_frozen():
    assert permlab.i_nk_exact(4, 2) == Fraction(5, 12)
    assert permlab.i_nk_exact(4, 1) == Fraction(5, 8)
    assert permlab.i_nk_exact(6, 3) == Fraction(29, 80)
    assert permlab.i_nk_exact(10, 5) == Fraction(45463, 145152)


def test_ink_limits():
    with pytest.raises(CapacityError):
        permlab.i_nk_exact(permlab.INK_EXACT_MAX_N + 1, 3)
    with pytest.raises(DomainError):
        permlab.i_nk_exact(4, 5)


def test_ink_mc_close_to_exact():
    est = permlab.i_nk_mc(8, 3, 100_000, seed=1)
    assert est.within(float(permlab.i_nk_exact(8, 3)), 4.0)


def test_pk_mc_frozen_and_reproducible():
    a = permlab.pk_mc(1, 100_000, 7)
    assert a.mean == 0.63375
    assert permlab.pk_mc(1, 100_000, 7, threads=3).mean == a.mean


@pytest.mark.parametrize("k", [3, 9, 15])
def test_pk_mc_agrees_with_exact(k):
    assert permlab.pk_mc(k, 100_000, 5).within(permlab.pk_exact_small(k), 4.0)


def test_subset_sum_hits_matches_enumeration(rng):
    for _ in range(300):
        m = int(rng.integers(0, 11))
        vals = rng.integers(1, 40, size=m)
        target = int(rng.integers(0, 120))
        sums = {sum(c) for r in range(m + 1) for c in itertools.combinations(vals.tolist(), r)}
        assert permlab.subset_sum_hits(vals, target) == (target in sums)


def test_subset_sum_hits_validation():
    assert permlab.subset_sum_hits([3, 5, 7], 12)
    assert not permlab.subset_sum_hits([3, 5, 7], 11)
    with pytest.raises(DomainError):
        permlab.subset_sum_hits([0, 2], 2)
    with pytest.raises(DomainError):
        permlab.subset_sum_hits([1], -1)


def test_cycle_type_weight_sums_to_one():
    # all cycle types of S_5
    total = Fraction(0)
    for parts in permlab._partitions(5):
        a = np.zeros(5, dtype=int)
        for p, mult in parts:
            a[p - 1] = mult
        total += CycleType(a, 5).weight()
    assert total == 1


def test_cycle_type_validation():
    with pytest.raises(DomainError):
        CycleType([1, 0, 1], 3)
    ct = CycleType.from_lengths([3, 1, 1], 5)
    assert ct.multiplicities.tolist() == [2, 0, 1, 0, 0]
    assert sorted(ct.lengths().tolist()) == [1, 1, 3]


def test_sample_cycle_type_fixed_point_law():
    n = 12
    fixed = [permlab.sample_cycle_type(n, StreamSeed(4, s)).multiplicities[0] for s in range(20_000)]
    # number of fixed points is close to Pois(1): mean 1 and P(0) about 1/e
    assert abs(np.mean(fixed) - 1.0) < 0.04
    assert abs(np.mean(np.array(fixed) == 0) - math.exp(-1)) < 0.015


def test_poisson_multiset_models():
    a0 = permlab.sample_poisson_multiset(50, "A0", StreamSeed(1))
    assert a0.multiplicities.size == 50 and a0.n is None
    np.testing.assert_allclose(a0.rates(), 1 / np.arange(1, 51))
    a = permlab.sample_poisson_multiset(2 ** 10, "A", StreamSeed(1))
    assert a.n == 10
    assert a.rates().sum() == pytest.approx(10.0, rel=1e-12)
    with pytest.raises(DomainError):
        permlab.sample_poisson_multiset(5, "B", StreamSeed(1))


def test_change_of_measure_exact_weight_is_unbiased():
    rep = permlab.change_of_measure_check(2 ** 8, 200_000, seed=2)
    se = math.hypot(rep.lhs.std_error, rep.rhs_exact_weight.std_error)
    assert abs(rep.rhs_exact_weight.mean - rep.lhs.mean) < 4 * se
    assert 0.7 <= rep.ratio <= 1.3
    with pytest.raises(DomainError):
        permlab.change_of_measure_check(2 ** 6, 10, seed=0)
