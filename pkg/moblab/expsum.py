import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional

import gmpy2
import numpy as np
from gmpy2 import mpq, mpz
from loguru import logger

from moblab import compute, utils
from moblab.constants import (
    ARC_PREC_BITS,
    BUDGET_TERMS,
    FIXED_POINT_BITS,
    GAUSS_DIRECT_MAX,
    SMALL_DENOMINATOR,
    WIDE_INT_BITS,
)
from moblab.exceptions import ArgumentError, ResourceError
from moblab.phase import PhaseReal
from moblab.sieve import ArithSegment, sieve_segment

# float64 rounding of a phase in [0, 1)
_ROUNDING = 2.0**-53
# accumulation error allowance per unit term
_ACCUMULATION = 2.0**-50


@dataclass
class ExpSumResult:
    """
    A weighted exponential sum with its error budget.

    Parameters
    ----------
    sum : complex
        The evaluated sum
    n_terms : int
        Number of integers in the summation range
    max_phase_error : float
        Bound on the error of every reduced phase frac(n^k alpha)
    weight_max : float
        Largest |weight| that entered the sum
    """
    sum: complex
    n_terms: int
    max_phase_error: float
    weight_max: float = 1.0

    @property
    def err_bound(self) -> float:
        return self.n_terms * self.weight_max * (2.0 * math.pi * self.max_phase_error + _ACCUMULATION)

    def __abs__(self) -> float:
        return abs(self.sum)

    def to_dict(self) -> dict:
        return {
            "re": self.sum.real,
            "im": self.sum.imag,
            "abs": abs(self.sum),
            "n_terms": self.n_terms,
            "err_bound": self.err_bound,
        }


@dataclass
class PhaseTable:
    """
    frac(n^k alpha) for lo < n <= hi, shared by every sum over the same
    range and phase.
    """
    lo: int
    hi: int
    k: int
    alpha: PhaseReal
    phases: np.ndarray
    max_error: float

    @property
    def n_terms(self) -> int:
        return self.hi - self.lo

    @classmethod
    def build(cls, x, y, k: int, alpha: PhaseReal, powers: Optional[List[mpz]] = None,
              budget: int = BUDGET_TERMS):
        """
        Parameters
        ----------
        x, y
            The range is x < n <= x + y
        k : int
            Power of n in the phase
        alpha : PhaseReal
            Phase; must meet the precision contract for n <= x + y
        powers : List[mpz], optional
            Precomputed n^k for the range, from `power_table`
        budget : int, optional
            Largest number of terms allowed
        """
        lo, hi = utils.interval_bounds(x, y)
        count = hi - lo
        if count > budget:
            raise ResourceError(f"{count} terms exceed the budget of {budget}.")
        alpha.check_contract(hi, k)
        value = alpha.reduced().value
        num, den = value.numerator, value.denominator
        if count == 0:
            phases = np.zeros(0)
            rounding = 0.0
        elif den < SMALL_DENOMINATOR:
            residues = compute.rational_residues(lo, count, k, int(num), int(den))
            phases = residues / float(den)
            rounding = _ROUNDING
        else:
            if powers is None:
                powers = power_table(lo, hi, k)
            if len(powers) != count:
                raise ArgumentError(f"Power table holds {len(powers)} entries, range holds {count}.")
            fixed = np.fromiter(
                (int((((p * num) % den) << FIXED_POINT_BITS) // den) for p in powers),
                dtype=np.int64,
                count=count,
            )
            phases = fixed * 2.0**-FIXED_POINT_BITS
            rounding = 2.0**-FIXED_POINT_BITS + _ROUNDING
        return cls(lo, hi, k, alpha, phases, rounding + alpha.phase_error(hi, k))

    def matches(self, lo: int, hi: int, k: int, alpha: PhaseReal) -> bool:
        return (self.lo, self.hi, self.k) == (lo, hi, k) and self.alpha == alpha

    def units(self) -> np.ndarray:
        return compute.unit_vector(self.phases)


def power_table(lo: int, hi: int, k: int) -> List[mpz]:
    """ n^k for lo < n <= hi as wide integers. """
    return [mpz(n)**k for n in range(lo + 1, hi + 1)]


def frac_nk_alpha(n: int, k: int, alpha: PhaseReal) -> float:
    """
    frac(n^k alpha) by exact modular arithmetic on the stored rational,
    rounded once to float64.
    """
    alpha.check_contract(n, k)
    num, den = alpha.numerator, alpha.denominator
    residue = (gmpy2.powmod(mpz(n), k, den) * num) % den
    return float(mpq(residue, den))


def _table_for(x, y, k, alpha, table, budget) -> PhaseTable:
    lo, hi = utils.interval_bounds(x, y)
    if table is None:
        return PhaseTable.build(x, y, k, alpha, budget=budget)
    if not table.matches(lo, hi, k, alpha):
        raise ArgumentError(
            f"Phase table for ({table.lo}, {table.hi}], k={table.k} does not match ({lo}, {hi}], k={k}."
        )
    return table


def weyl_sum(x, y, k: int, alpha: PhaseReal, budget: int = BUDGET_TERMS,
             table: Optional[PhaseTable] = None) -> ExpSumResult:
    """
    Sum of e(n^k alpha) over x < n <= x + y.
    """
    table = _table_for(x, y, k, alpha, table, budget)
    total = compute.weighted_unit_sum(table.phases)
    return ExpSumResult(total, table.n_terms, table.max_error)


def twisted_expsum(x, y, k: int, alpha: PhaseReal, weights: np.ndarray,
                   budget: int = BUDGET_TERMS, table: Optional[PhaseTable] = None) -> ExpSumResult:
    """
    Sum of c(n) e(n^k alpha) over x < n <= x + y; weights[i] is c(n)
    for n = floor(x) + 1 + i.
    """
    table = _table_for(x, y, k, alpha, table, budget)
    weights = np.asarray(weights)
    if weights.shape != (table.n_terms,):
        raise ArgumentError(f"Expected {table.n_terms} weights, got shape {weights.shape}.")
    total = compute.weighted_unit_sum(table.phases, weights)
    weight_max = float(np.abs(weights).max()) if weights.size else 0.0
    return ExpSumResult(total, table.n_terms, table.max_error, weight_max)


def _segment_values(x, y, segment: ArithSegment, name: str) -> np.ndarray:
    lo, hi = utils.interval_bounds(x, y)
    if not segment.covers(lo, hi):
        raise ArgumentError(
            f"Segment ({segment.x}, {segment.end}] does not cover ({lo}, {hi}]."
        )
    return segment.window(lo, hi).get(name)


def mobius_expsum(x, y, k: int, alpha: PhaseReal, segment: ArithSegment,
                  budget: int = BUDGET_TERMS, table: Optional[PhaseTable] = None) -> ExpSumResult:
    """
    S_k(x, y; alpha), the sum of mu(n) e(n^k alpha) over x < n <= x + y,
    with mu read from `segment`.
    """
    mu = _segment_values(x, y, segment, "mu")
    return twisted_expsum(x, y, k, alpha, mu.astype(np.float64), budget, table)


def mangoldt_expsum(x, y, k: int, alpha: PhaseReal, segment: ArithSegment,
                    budget: int = BUDGET_TERMS, table: Optional[PhaseTable] = None) -> ExpSumResult:
    """ Sum of Lambda(n) e(n^k alpha) over x < n <= x + y. """
    lambda_vals = _segment_values(x, y, segment, "lambda")
    return twisted_expsum(x, y, k, alpha, lambda_vals, budget, table)


def _gauss_direct(q: int, a: int, k: int) -> complex:
    if q >= SMALL_DENOMINATOR:
        raise ResourceError(f"Direct Gauss sum needs q < 2^31, got {q}.")
    residues = compute.rational_residues(0, q, k, a % q, q)
    return compute.weighted_unit_sum(residues / float(q))


def gauss_sum(q: int, a: int, k: int, method: str = "auto") -> complex:
    """
    Complete sum S(q, a) = sum over 1 <= n <= q of e(a n^k / q).

    Parameters
    ----------
    q : int
        Modulus, q >= 1
    a : int
        Numerator coprime to q
    k : int
        Power, k >= 3
    method : str, optional
        "direct" sums all q terms; "crt" multiplies the sums over the
        coprime prime-power factors of q; "auto" uses the split above
        10^5

    Returns
    -------
    complex
        S(q, a)
    """
    q, a = int(q), int(a)
    if q < 1:
        raise ArgumentError(f"Modulus must be positive, got {q}.")
    if math.gcd(a, q) != 1:
        raise ArgumentError(f"gcd({a}, {q}) = {math.gcd(a, q)}; Gauss sums need coprime arguments.")
    if q == 1:
        return complex(1.0, 0.0)
    if method == "auto":
        method = "crt" if q > GAUSS_DIRECT_MAX else "direct"
    if method == "direct":
        return _gauss_direct(q, a, k)
    if method != "crt":
        raise ArgumentError(f"Unknown Gauss sum method {method!r}.")
    (p, e), *rest = utils.factorize(q).items()
    q1 = p**e
    if not rest:
        return _gauss_direct(q, a, k)
    q2 = q // q1
    first = _gauss_direct(q1, a * pow(q2, k - 1, q1) % q1, k)
    second = gauss_sum(q2, a * pow(q1, k - 1, q2) % q2, k, method="crt")
    return first * second


@dataclass(frozen=True)
class WkWeight:
    q: int
    k: int
    value: float

    def __float__(self) -> float:
        return self.value


@lru_cache(maxsize=None)
def w_k(q: int, k: int) -> WkWeight:
    """
    The multiplicative weight w_k(q): on a prime power p^e with
    e = k u + v, 1 <= v <= k, it is k p^(-u - 1/2) when v = 1 and
    p^(-u - 1) otherwise.
    """
    q, k = int(q), int(k)
    if q < 1 or k < 3:
        raise ArgumentError(f"w_k needs q >= 1 and k >= 3, got q={q}, k={k}.")
    value = 1.0
    for p, e in utils.factorize(q).items():
        u = (e - 1) // k
        v = e - k * u
        if v == 1:
            value *= k * p**(-u - 0.5)
        else:
            value *= p**(-u - 1.0)
    return WkWeight(q, k, value)


def gauss_bound_constant(q_max: int, k: int) -> float:
    """
    Largest |S(q, a)| / (q w_k(q)) over 1 <= q <= q_max and all a
    coprime to q. The maximum over a factors across the prime powers
    of q, so only prime-power moduli are summed directly.
    """
    local_max = dict()
    for p in utils.primes_up_to(q_max):
        p = int(p)
        Q = p
        while Q <= q_max:
            scale = Q * w_k(Q, k).value
            local_max[Q] = max(
                abs(_gauss_direct(Q, a, k)) / scale for a in range(1, Q) if a % p
            )
            Q *= p
    best = 1.0
    for q in range(2, q_max + 1):
        ratio = 1.0
        for p, e in utils.factorize(q).items():
            ratio *= local_max[p**e]
        best = max(best, ratio)
    logger.debug(f"Gauss bound constant for q <= {q_max}, k = {k}: {best:.6f}")
    return best


def major_arc_term(q: int, a: int, alpha: PhaseReal, x, y, k: int) -> float:
    """
    w_k(q) y / (1 + y x^(k-1) |alpha - a/q|)
    """
    if math.gcd(int(a), int(q)) != 1:
        raise ArgumentError(f"gcd({a}, {q}) != 1")
    lam = abs(alpha.value - mpq(int(a), int(q)))
    x, y = utils.to_mpq(x), utils.to_mpq(y)
    with utils.high_precision(ARC_PREC_BITS):
        denominator = 1 + gmpy2.mpfr(y) * gmpy2.mpfr(x)**(k - 1) * gmpy2.mpfr(lam)
        value = w_k(q, k).value * gmpy2.mpfr(y) / denominator
    return float(value)


def r_poly(n: int, h: int, k: int) -> int:
    """
    R(n, h) = ((n + h)^k - n^k) / h, expanded binomially so the
    division is never taken.
    """
    n, h, k = int(n), int(h), int(k)
    if h < 1:
        raise ArgumentError(f"Shift h must be >= 1, got {h}.")
    value = sum(math.comb(k, j) * n**j * h**(k - 1 - j) for j in range(k))
    if abs(value).bit_length() > WIDE_INT_BITS:
        raise ResourceError(f"R({n}, {h}) with k={k} exceeds {WIDE_INT_BITS} bits.")
    return value


def _grouped_weight_sum(gcds: np.ndarray, moments: np.ndarray, q: int, k: int) -> float:
    """ Sum of moments[i] * w_k(q / gcds[i]) with exact integer moments per gcd class. """
    terms = list()
    for g in np.unique(gcds):
        mask = gcds == g
        moment = sum(int(m) for m in moments[mask])
        terms.append(moment * w_k(q // int(g), k).value)
    return math.fsum(terms)


def wk_sum_lemma37(N: int, q: int, j: int, k: int, c: int) -> float:
    """
    Sum over N < n <= 2N of tau(n)^c w_k(q / (q, n^j)).
    """
    N, q = int(N), int(q)
    if not 1 <= j <= k:
        raise ArgumentError(f"Need 1 <= j <= k, got j={j}, k={k}.")
    if N < 1 or q < 1:
        raise ArgumentError(f"Need N >= 1 and q >= 1, got N={N}, q={q}.")
    if q >= SMALL_DENOMINATOR:
        raise ResourceError(f"Modulus {q} too large for the residue kernel.")
    tau = sieve_segment(N, N, ("tau",)).tau
    residues = compute.rational_residues(N, N, j, 1, q)
    gcds = np.gcd(residues, q)
    moments = np.array([int(t)**c for t in tau], dtype=object)
    return _grouped_weight_sum(gcds, moments, q, k)


def wk_sum_lemma37_shifted(N: int, q: int, h: int, k: int, c: int) -> float:
    """
    Sum over N < n <= 2N with (n, h) = 1 of
    tau(n)^c tau(n + h)^c w_k(q / (q, R(n, h))).
    """
    N, q, h = int(N), int(q), int(h)
    if N < 1 or q < 1 or h < 1:
        raise ArgumentError(f"Need N, q, h >= 1, got N={N}, q={q}, h={h}.")
    tau = sieve_segment(N, N + h, ("tau",)).tau
    gcds, moments = list(), list()
    for n in range(N + 1, 2 * N + 1):
        if math.gcd(n, h) != 1:
            continue
        gcds.append(math.gcd(r_poly(n, h, k) % q, q))
        moments.append((int(tau[n - N - 1]) * int(tau[n + h - N - 1]))**c)
    if not gcds:
        return 0.0
    return _grouped_weight_sum(np.array(gcds), np.array(moments, dtype=object), q, k)
