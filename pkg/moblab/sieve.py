import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Iterable, Iterator, Optional, Tuple

import numpy as np
from loguru import logger
from numba import njit

from moblab import utils
from moblab.constants import DEFAULT_SEGMENT_SIZE, MAX_SEGMENT_ENTRIES, MAX_SIEVE_END
from moblab.exceptions import ArgumentError, ResourceError

ARITH_FUNCTIONS = ("mu", "lambda", "tau")


@dataclass
class ArithSegment:
    """
    Values of mu, Lambda and tau on the half-open interval (x, x + y].
    Entry i of every array belongs to n = x + 1 + i; arrays that were
    not requested are None.
    """
    x: int
    y: int
    mu: Optional[np.ndarray] = None
    lambda_vals: Optional[np.ndarray] = None
    tau: Optional[np.ndarray] = None

    def __repr__(self) -> str:
        held = [name for name, arr in self._arrays() if arr is not None]
        return f"ArithSegment(({self.x}, {self.x + self.y}], {held})"

    def _arrays(self):
        return (("mu", self.mu), ("lambda", self.lambda_vals), ("tau", self.tau))

    @property
    def end(self) -> int:
        return self.x + self.y

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.x + 1, self.end + 1, dtype=np.int64)

    def covers(self, lo: int, hi: int) -> bool:
        return self.x <= lo and hi <= self.end

    def window(self, lo: int, hi: int) -> "ArithSegment":
        """ The sub-segment (lo, hi], sharing memory with this one. """
        if not self.covers(lo, hi) or hi < lo:
            raise ArgumentError(
                f"Segment ({self.x}, {self.end}] does not cover ({lo}, {hi}]."
            )
        start, stop = lo - self.x, hi - self.x
        arrays = [None if arr is None else arr[start:stop] for _, arr in self._arrays()]
        return ArithSegment(lo, hi - lo, *arrays)

    def get(self, name: str) -> np.ndarray:
        arr = dict(self._arrays())[name]
        if arr is None:
            raise ArgumentError(f"Segment was sieved without {name}.")
        return arr


@njit(cache=True)
def _sieve_block(lo: int, count: int, primes: np.ndarray):
    """
    mu, Lambda and tau for n = lo + 1, ..., lo + count. Each n is
    divided by the sieving primes; a remaining cofactor above 1 is
    a single prime larger than sqrt(lo + count).
    """
    remaining = np.empty(count, dtype=np.int64)
    for index in range(count):
        remaining[index] = lo + 1 + index
    mu = np.ones(count, dtype=np.int8)
    tau = np.ones(count, dtype=np.int64)
    omega = np.zeros(count, dtype=np.int64)
    last_prime = np.zeros(count, dtype=np.int64)
    hi = lo + count
    for p in primes:
        start = (lo // p + 1) * p
        for n in range(start, hi + 1, p):
            index = n - lo - 1
            e = 0
            while remaining[index] % p == 0:
                remaining[index] //= p
                e += 1
            tau[index] *= e + 1
            omega[index] += 1
            last_prime[index] = p
            if e > 1:
                mu[index] = 0
            else:
                mu[index] = -mu[index]
    lambda_vals = np.zeros(count, dtype=np.float64)
    for index in range(count):
        if remaining[index] > 1:
            tau[index] *= 2
            omega[index] += 1
            last_prime[index] = remaining[index]
            mu[index] = -mu[index]
        if omega[index] == 1:
            lambda_vals[index] = np.log(last_prime[index])
    return mu, lambda_vals, tau


def _sieve_task(args: Tuple[int, int, int]):
    lo, count, hi = args
    primes = np.array(utils.primes_up_to(math.isqrt(hi)))
    return _sieve_block(lo, count, primes)


def _validate(x: int, y: int, want: Iterable[str]):
    if x < 0 or y < 1:
        raise ArgumentError(f"Need x >= 0 and y >= 1, got x={x}, y={y}.")
    if x + y > MAX_SIEVE_END:
        raise ResourceError(f"x + y = {x + y} exceeds the 64-bit sieve range.")
    unknown = set(want) - set(ARITH_FUNCTIONS)
    if unknown:
        raise ArgumentError(f"Unknown arithmetic functions {sorted(unknown)}; choose from {ARITH_FUNCTIONS}.")


def sieve_segment(
    x: int,
    y: int,
    want: Iterable[str] = ARITH_FUNCTIONS,
    segment_size: int = DEFAULT_SEGMENT_SIZE,
    max_entries: int = MAX_SEGMENT_ENTRIES,
    workers: int = 1,
) -> ArithSegment:
    """
    Sieve mu(n), Lambda(n) and tau(n) for x < n <= x + y using the
    primes up to sqrt(x + y), one block of `segment_size` entries at
    a time.

    Parameters
    ----------
    x : int
        Exclusive lower endpoint, x >= 0
    y : int
        Interval length, y >= 1
    want : Iterable[str], optional
        Subset of {"mu", "lambda", "tau"} to keep
    segment_size : int, optional
        Entries per block, by default 2^20
    max_entries : int, optional
        Largest y held in memory at once; longer intervals should be
        streamed with `iter_segments`
    workers : int, optional
        Number of processes sieving disjoint blocks, by default 1

    Returns
    -------
    ArithSegment
        The requested arrays over (x, x + y]

    Raises
    ------
    ResourceError
        If y exceeds `max_entries` or x + y leaves the int64 range
    """
    x, y = int(x), int(y)
    want = tuple(want)
    _validate(x, y, want)
    if y > max_entries:
        raise ResourceError(
            f"y = {y} exceeds the in-memory budget of {max_entries} entries; stream with iter_segments."
        )
    hi = x + y
    tasks = [
        (lo, min(segment_size, hi - lo), hi) for lo in range(x, hi, segment_size)
    ]
    logger.debug(f"Sieving ({x}, {hi}] in {len(tasks)} block(s).")
    if workers > 1 and len(tasks) > 1:
        with Pool(workers) as pool:
            blocks = pool.map(_sieve_task, tasks)
    else:
        blocks = [_sieve_task(task) for task in tasks]
    mu, lambda_vals, tau = (np.concatenate(arrays) for arrays in zip(*blocks))
    return ArithSegment(
        x,
        y,
        mu if "mu" in want else None,
        lambda_vals if "lambda" in want else None,
        tau if "tau" in want else None,
    )


def iter_segments(
    x: int, y: int, want: Iterable[str] = ARITH_FUNCTIONS, segment_size: int = DEFAULT_SEGMENT_SIZE
) -> Iterator[ArithSegment]:
    """ Stream (x, x + y] as consecutive segments of at most `segment_size` entries. """
    x, y = int(x), int(y)
    want = tuple(want)
    _validate(x, y, want)
    for lo in range(x, x + y, segment_size):
        yield sieve_segment(lo, min(segment_size, x + y - lo), want, segment_size)


def mertens(N: int, segment_size: int = DEFAULT_SEGMENT_SIZE) -> int:
    """ M(N) = sum of mu(n) for n <= N, stitched from streamed segments. """
    if N < 1:
        return 0
    return int(sum(int(seg.mu.sum(dtype=np.int64)) for seg in iter_segments(0, N, ("mu",), segment_size)))


def divisor_power_sum(x: int, y: int, c: int) -> int:
    """
    Exact sum of tau(n)^c over x < n <= x + y, as a Python int.
    """
    if c < 1:
        raise ArgumentError(f"Exponent c must be >= 1, got {c}.")
    total = 0
    for seg in iter_segments(x, y, ("tau",)):
        values, counts = np.unique(seg.tau, return_counts=True)
        total += sum(int(v)**c * int(n) for v, n in zip(values, counts))
    return total
