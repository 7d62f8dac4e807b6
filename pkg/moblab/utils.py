import json
import math
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Tuple, Union

import gmpy2
import numpy as np
from gmpy2 import mpq, mpz
from ruamel.yaml import YAML

from moblab.exceptions import ArgumentError, ConfigError

MPFR = type(gmpy2.mpfr(0))
Number = Union[int, float, str, mpq, mpz, MPFR, Fraction]

_PRIME_CACHE = np.array([2, 3, 5, 7], dtype=np.int64)
_PRIME_LIMIT = 10


def load_yaml(yml_path: str) -> dict:
    with open(yml_path, "r") as read_file:
        yaml = YAML(typ="safe")
        input_dict = yaml.load(read_file)
    return input_dict


def load_json(json_path: str) -> dict:
    with open(json_path, "r") as read_file:
        input_dict = json.load(read_file)
    return input_dict


def load_mapping(path: str) -> dict:
    """
    Read a JSON or YAML file into a dictionary, choosing the
    parser from the file suffix.
    """
    path = str(path)
    if path.endswith(".json"):
        data = load_json(path)
    elif path.endswith((".yml", ".yaml")):
        data = load_yaml(path)
    else:
        raise ConfigError(f"Unrecognized file type for {path}; use .json, .yml or .yaml")
    if data is None:
        data = dict()
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not hold a mapping.")
    return data


def to_mpq(value: Number) -> mpq:
    """
    Convert a number to an exact rational. Strings are read as exact
    decimals or fractions ("0.85", "1e6", "3/4"); floats and mpfr
    values convert by their exact binary value.
    """
    if isinstance(value, str):
        try:
            frac = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ArgumentError(f"Could not parse {value!r} as a number.")
        return mpq(frac.numerator, frac.denominator)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ArgumentError(f"Non-finite value {value}.")
        return mpq(*value.as_integer_ratio())
    if isinstance(value, MPFR):
        if not gmpy2.is_finite(value):
            raise ArgumentError(f"Non-finite value {value}.")
        return mpq(value)
    if isinstance(value, (np.integer, np.floating)):
        return to_mpq(value.item())
    return mpq(value)


def integral(value: Number) -> Union[int, mpq]:
    """ Return `value` as an int when it is integral, else as an exact rational. """
    value = to_mpq(value)
    if value.denominator == 1:
        return int(value.numerator)
    return value


def floor(value: Number) -> int:
    value = to_mpq(value)
    return int(value.numerator // value.denominator)


def interval_bounds(x: Number, y: Number) -> Tuple[int, int]:
    """
    Integers n with x < n <= x + y are exactly lo < n <= hi for the
    returned pair (lo, hi).
    """
    x, y = to_mpq(x), to_mpq(y)
    if y < 0:
        raise ArgumentError(f"Interval length must be non-negative, got {float(y)}.")
    return floor(x), floor(x + y)


def scaled_bounds(lo: Number, hi: Number, d: int) -> Tuple[int, int]:
    """ Integers m with lo/d < m <= hi/d as the pair (floor(lo/d), floor(hi/d)). """
    lo, hi = to_mpq(lo), to_mpq(hi)
    return floor(lo / d), floor(hi / d)


def simple_sieve(limit: int) -> np.ndarray:
    if limit < 2:
        return np.array([], dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p: limit + 1: p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


def primes_up_to(limit: int) -> np.ndarray:
    """
    Primes <= limit from a module-level cache. The cache only grows;
    the returned array is read-only.
    """
    global _PRIME_CACHE, _PRIME_LIMIT
    limit = int(limit)
    if limit > _PRIME_LIMIT:
        new_limit = max(limit, 2 * _PRIME_LIMIT, 2**16)
        primes = simple_sieve(new_limit)
        primes.setflags(write=False)
        _PRIME_CACHE, _PRIME_LIMIT = primes, new_limit
    count = np.searchsorted(_PRIME_CACHE, limit, side="right")
    return _PRIME_CACHE[:count]


@lru_cache(maxsize=65536)
def _factorize(n: int) -> Tuple[Tuple[int, int], ...]:
    factors = list()
    for p in primes_up_to(math.isqrt(n)):
        p = int(p)
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            factors.append((p, e))
    if n > 1:
        factors.append((n, 1))
    return tuple(factors)


def factorize(n: int) -> Dict[int, int]:
    """
    Prime factorization of n >= 1 by trial division over the cached
    primes, as a {prime: exponent} dictionary.
    """
    n = int(n)
    if n < 1:
        raise ArgumentError(f"Cannot factorize {n}.")
    return dict(_factorize(n))


def divisors(n: int) -> List[int]:
    divs = [1]
    for p, e in factorize(n).items():
        divs = [d * p**j for d in divs for j in range(e + 1)]
    return sorted(divs)


def mobius(n: int) -> int:
    factors = factorize(n)
    if any(e > 1 for e in factors.values()):
        return 0
    return -1 if len(factors) % 2 else 1


def totient(n: int) -> int:
    result = 1
    for p, e in factorize(n).items():
        result *= (p - 1) * p**(e - 1)
    return result


def divisor_count(n: int) -> int:
    result = 1
    for e in factorize(n).values():
        result *= e + 1
    return result


def lcm(*values: int) -> int:
    result = 1
    for v in values:
        result = result * int(v) // math.gcd(result, int(v))
    return result


def high_precision(bits: int):
    """ Context manager running mpfr arithmetic with `bits` of precision. """
    return gmpy2.context(gmpy2.get_context(), precision=int(bits))
