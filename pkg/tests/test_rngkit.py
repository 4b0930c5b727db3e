import math

import numpy as np
import pytest

from permsums import rngkit
from permsums.errors import DomainError
from permsums.rngkit import MCEstimate, StreamSeed


def test_stream_ids_frozen():
    assert StreamSeed(0, 0).child(1).stream_id == 6791897765849424158
    assert StreamSeed(5, 0).child("x", 2).stream_id == 12579489845315895044


def test_children_are_distinct_and_deterministic():
    s = StreamSeed(3, 0)
    ids = {s.child(b).stream_id for b in range(1000)}
    assert len(ids) == 1000
    assert s.child("a", 1) == s.child("a", 1)
    assert s.child("a", 1) != s.child(1, "a")


def test_stream_seed_rejects_bad_values():
    with pytest.raises(DomainError):
        StreamSeed(-1)
    with pytest.raises(DomainError):
        StreamSeed(0, 1 << 64)


def test_sample_poisson_frozen():
    np.testing.assert_array_equal(rngkit.sample_poisson(2.5, StreamSeed(1, 0), size=5), [1, 4, 3, 3, 2])


@pytest.mark.parametrize("lam", [0.05, 1.0, 7.5, 45.0, 300.0])
def test_poisson_moments(lam):
    x = rngkit.sample_poisson(lam, StreamSeed(11, int(lam * 100)), size=200_000).astype(float)
    se = math.sqrt(lam / x.size)
    assert abs(x.mean() - lam) < 5 * se
    assert abs(x.var() / lam - 1.0) < 0.03


def test_uniform_interval_is_half_open():
    u = rngkit.sample_uniform_interval(2.0, 3.0, StreamSeed(2), size=100_000)
    assert u.min() > 2.0 and u.max() <= 3.0
    assert abs(u.mean() - 2.5) < 0.005


def test_block_sizes():
    assert rngkit.block_sizes(10, 4) == [3, 3, 2, 2]
    assert sum(rngkit.block_sizes(1_000_003)) == 1_000_003
    with pytest.raises(DomainError):
        rngkit.block_sizes(5, 0)


def test_thread_count_does_not_change_results():
    kern = lambda g, c: g.random(c)
    a = rngkit.mc_estimate(kern, 50_000, 9, "t", threads=1)
    b = rngkit.mc_estimate(kern, 50_000, 9, "t", threads=4)
    assert a.mean == b.mean and a.std_error == b.std_error


def test_tags_separate_streams():
    kern = lambda g, c: g.random(c)
    assert rngkit.mc_estimate(kern, 1000, 0, "a").mean != rngkit.mc_estimate(kern, 1000, 0, "b").mean


def test_mc_estimate_rejects_empty():
    with pytest.raises(DomainError):
        rngkit.mc_estimate(lambda g, c: g.random(c), 0, 0, "x")


def test_mcestimate_from_values_and_zscore():
    e = MCEstimate.from_values([1.0, 2.0, 3.0, 4.0], 0)
    assert e.mean == 2.5
    assert e.std_error == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert e.zscore(2.5) == 0.0
    assert e.within(2.6, 1.0)


def test_merge_estimates_matches_pooled():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=400), rng.normal(1.0, 2.0, size=900)
    merged = rngkit.merge_estimates([MCEstimate.from_values(a, 0), MCEstimate.from_values(b, 0)])
    pooled = MCEstimate.from_values(np.concatenate((a, b)), 0)
    assert merged.mean == pytest.approx(pooled.mean, rel=1e-12)
    assert merged.std_error == pytest.approx(pooled.std_error, rel=1e-9)


def test_env_thread_fallback(monkeypatch):
    monkeypatch.setenv("PERMLAB_THREADS", "3")
    assert rngkit.default_threads() == 3
    monkeypatch.setenv("PERMLAB_THREADS", "junk")
    assert rngkit.default_threads() == 1
