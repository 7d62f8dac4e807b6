import math

import numpy as np
import pytest
from sympy import divisor_count, factorint

from moblab.exceptions import ArgumentError, ResourceError
from moblab.sieve import divisor_power_sum, iter_segments, mertens, sieve_segment


def _mu(n):
    factors = factorint(n)
    if any(e > 1 for e in factors.values()):
        return 0
    return (-1)**len(factors)


def _mangoldt(n):
    factors = factorint(n)
    if len(factors) != 1:
        return 0.0
    return math.log(next(iter(factors)))


def test_small_segments():
    segment = sieve_segment(10, 6)
    assert segment.mu.tolist() == [-1, 0, -1, 1, 1, 0]
    assert sieve_segment(0, 4, ("mu",)).mu.tolist() == [1, -1, -1, 0]
    expected = [math.log(11), 0., math.log(13), 0., 0., math.log(2)]
    assert np.allclose(segment.lambda_vals, expected)
    assert segment.tau.tolist() == [2, 6, 2, 4, 4, 5]
    assert sieve_segment(10, 6, ("tau",)).mu is None


def test_against_factorization():
    x, y = 10**6, 2000
    segment = sieve_segment(x, y)
    for n, mu, lam, tau in zip(segment.n, segment.mu, segment.lambda_vals, segment.tau):
        n = int(n)
        assert mu == _mu(n)
        assert tau == divisor_count(n)
        assert np.round(abs(lam - _mangoldt(n)), 10) == 0.


def test_blocks_agree():
    whole = sieve_segment(5000, 3000)
    blocked = sieve_segment(5000, 3000, segment_size=128)
    assert np.array_equal(whole.mu, blocked.mu)
    assert np.array_equal(whole.tau, blocked.tau)
    streamed = np.concatenate([seg.mu for seg in iter_segments(5000, 3000, ("mu",), 1000)])
    assert np.array_equal(whole.mu, streamed)


def test_window():
    segment = sieve_segment(100, 100)
    window = segment.window(120, 130)
    assert window.x == 120 and window.y == 10
    assert np.array_equal(window.mu, segment.mu[20:30])
    with pytest.raises(ArgumentError):
        segment.window(50, 130)
    with pytest.raises(ArgumentError):
        sieve_segment(10, 6, ("mu",)).get("tau")


def test_errors():
    with pytest.raises(ResourceError):
        sieve_segment(0, 100, max_entries=10)
    with pytest.raises(ArgumentError):
        sieve_segment(-1, 10)
    with pytest.raises(ArgumentError):
        sieve_segment(0, 10, ("sigma",))


def test_divisor_power_sum():
    assert divisor_power_sum(0, 4, 1) == 8
    assert divisor_power_sum(0, 4, 2) == 18
    assert divisor_power_sum(100, 50, 2) == sum(int(divisor_count(n))**2 for n in range(101, 151))


def test_mertens():
    assert mertens(1) == 1
    assert mertens(10) == -1
    assert mertens(100) == 1
    assert mertens(1000) == 2


def test_mertens_stitched_against_monolithic():
    N = 10**5
    monolithic = np.cumsum(sieve_segment(0, N, ("mu",)).mu.astype(np.int64))
    stitched = np.cumsum(np.concatenate([seg.mu for seg in iter_segments(0, N, ("mu",), 997)]).astype(np.int64))
    assert np.array_equal(monolithic, stitched)
    for n in (1, 2, 39, 4096, 65537, 99991, N):
        assert mertens(n, segment_size=4096) == monolithic[n - 1]
    assert monolithic[-1] == -48


def test_square_free_density():
    mu = sieve_segment(0, 10**6, ("mu",)).mu
    density = np.count_nonzero(mu) / 10**6
    assert abs(density - 6 / math.pi**2) < 0.002


@pytest.mark.slow
def test_random_points_against_factorization():
    rng = np.random.default_rng(29)
    for n in rng.integers(2, 10**9 + 1, 10**4):
        n = int(n)
        segment = sieve_segment(n - 1, 1)
        assert segment.mu[0] == _mu(n)
        assert segment.tau[0] == divisor_count(n)
        assert np.round(abs(segment.lambda_vals[0] - _mangoldt(n)), 10) == 0.
