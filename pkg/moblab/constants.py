"""
Numerical defaults shared across moblab.
"""

# interval sieve
DEFAULT_SEGMENT_SIZE = 2**20
MAX_SEGMENT_ENTRIES = 2**27
MAX_SIEVE_END = 2**63 - 1

# term budget for any single exponential sum or sweep
BUDGET_TERMS = 10**9

# phase precision contract: bits >= k * log2(x + y) + GUARD_BITS
GUARD_BITS = 64
MIN_PREC_BITS = 64
PHASE_ERROR_MAX = 2.0**-40
FIXED_POINT_BITS = 60

# fixed block length for deterministic reductions
BLOCK_SIZE = 2**16

# exact rational phases below this denominator take the int64 path
SMALL_DENOMINATOR = 2**31

# gauss sums switch to the multiplicative split above this modulus
GAUSS_DIRECT_MAX = 10**5

# R(n, h) must fit in this many bits
WIDE_INT_BITS = 128

# precision used for P, Q, R and the plan thresholds
ARC_PREC_BITS = 256

CHARACTER_MAX_MODULUS = 10**6

# exponent slack in the twisted-sum bound
EPS = 0.01

# sweep grid defaults
DEFAULT_Q_MAX = 20
DEFAULT_UNIFORM_COUNT = 16
DEFAULT_DELTAS = ("1/R", "-1/R", "1/(qQ)", "-1/(qQ)")
LEMMA31_Q_MAX = 6
UNIFORM_BITS = 64

# report formatting
FLOAT_FORMAT = "%.17g"


def default_c1(k: int) -> float:
    """ Default exponent of log x in P = (log x)^c1. """
    return 8.0 * (k + 1)
