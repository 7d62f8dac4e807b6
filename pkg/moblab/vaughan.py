from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import gmpy2
import numpy as np
from gmpy2 import mpq
from loguru import logger

from moblab import compute, utils
from moblab.constants import ARC_PREC_BITS, BUDGET_TERMS, default_c1
from moblab.exceptions import ArgumentError, PlanError, ResourceError
from moblab.expsum import PhaseTable
from moblab.phase import PhaseReal
from moblab.sieve import sieve_segment

Coefficients = Union[Callable[[int], float], np.ndarray, "CoefficientTable"]

THETA_MIN = mpq(3, 4)


def _as_float(value) -> Optional[float]:
    return None if value is None else float(value)


def _as_exact(value) -> Optional[str]:
    if isinstance(value, mpq):
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return None


@dataclass
class VaughanPlan:
    """
    Parameters of Vaughan's identity for the interval (x, x + y].

    theta, gamma, rho and sigma_k are exact rationals whenever theta
    was given exactly; U and V are 256-bit mpfr thresholds. `slack`
    maps each side condition to the gap between its exponents of x
    (non-negative when the condition holds).
    """
    x: mpq
    y: "gmpy2.mpfr"
    k: int
    theta: Optional[Union[mpq, "gmpy2.mpfr"]]
    gamma: Optional[mpq]
    rho: Optional[mpq]
    sigma_k: mpq
    U: "gmpy2.mpfr"
    V: "gmpy2.mpfr"
    c1: float
    slack: Dict[str, float] = field(default_factory=dict)
    manual: bool = False

    @property
    def UV(self):
        return self.U * self.V

    @classmethod
    def manual_plan(cls, x, y, k: int, U, V, c1: Optional[float] = None):
        """ A plan with caller-chosen thresholds U, V >= 1 and no side conditions. """
        x_q, y_q = utils.to_mpq(x), utils.to_mpq(y)
        U_q, V_q = utils.to_mpq(U), utils.to_mpq(V)
        if U_q < 1 or V_q < 1:
            raise PlanError(f"U and V must be >= 1, got U={float(U_q)}, V={float(V_q)}.")
        with utils.high_precision(ARC_PREC_BITS):
            theta = gmpy2.log(gmpy2.mpfr(y_q)) / gmpy2.log(gmpy2.mpfr(x_q)) if x_q > 1 and y_q > 0 else None
            U_f, V_f, y_f = gmpy2.mpfr(U_q), gmpy2.mpfr(V_q), gmpy2.mpfr(y_q)
        return cls(x_q, y_f, int(k), theta, None, None, mpq(1, 2 * k * (k - 1)), U_f, V_f,
                   c1 if c1 is not None else default_c1(k), manual=True)

    def to_dict(self) -> dict:
        exact = {
            name: _as_exact(getattr(self, name))
            for name in ("theta", "gamma", "rho", "sigma_k")
            if _as_exact(getattr(self, name)) is not None
        }
        return {
            "x": float(self.x),
            "y": float(self.y),
            "k": self.k,
            "theta": _as_float(self.theta),
            "gamma": _as_float(self.gamma),
            "rho": _as_float(self.rho),
            "sigma_k": float(self.sigma_k),
            "U": float(self.U),
            "V": float(self.V),
            "UV": float(self.UV),
            "c1": float(self.c1),
            "exact": exact,
            "slack": dict(self.slack),
            "manual": self.manual,
        }


def side_conditions(theta, k: int, gamma, rho, sigma) -> Dict[str, object]:
    """
    Exponent-level slack of every condition the plan must meet,
    written as (exponent of x on the large side) - (exponent on the
    small side); implied constants are not modelled.
    """
    v_exp = 1 - theta + 2 * rho
    uv_exp = 1 - theta / 2 + rho
    return {
        "type_I_V": theta + (theta - 1) * (gamma + 1) / (gamma - sigma - 1) - v_exp,
        "minor_arc_V": theta - gamma * rho / sigma - v_exp,
        "type_I_V2k": theta + k - 1 - 2 * k * rho - 2 * k * v_exp,
        "UV_lower": uv_exp - mpq(1, 2),
        "UV_upper": theta - 2 * rho - uv_exp,
        "type_II_theta": theta - (3 * gamma - sigma - 1) / (2 * (1 - 2 * rho) * (2 * gamma - sigma - 1)),
        "weyl_range": theta - gamma / (2 * gamma - sigma - 1),
    }


def make_plan(x, y=None, k: int = 3, theta=None, c1: Optional[float] = None) -> VaughanPlan:
    """
    Choose U = x^(theta/2 - rho) and V = x^(1 - theta + 2 rho) with

        sigma_k = 1 / (2k(k - 1)),
        gamma = 1 / (theta - 3/4),
        rho = min(sigma_k / (8 gamma), (theta - 2/3) / 2) / 2.

    Give exactly one of `y` (then theta = log y / log x) or `theta`
    (then y = x^theta); an exact theta such as "0.85" keeps every
    exponent an exact rational.

    Raises
    ------
    PlanError
        If theta <= 3/4 or theta > 1, x <= 1, or a side condition fails
    """
    k = int(k)
    if (y is None) == (theta is None):
        raise ArgumentError("Give exactly one of y or theta.")
    x_q = utils.to_mpq(x)
    if x_q <= 1:
        raise PlanError(f"x must exceed 1, got {float(x_q)}.")
    with utils.high_precision(ARC_PREC_BITS):
        x_f = gmpy2.mpfr(x_q)
        if theta is None:
            y_f = gmpy2.mpfr(utils.to_mpq(y))
            theta = gmpy2.log(y_f) / gmpy2.log(x_f)
        else:
            theta = utils.to_mpq(theta)
            y_f = x_f**gmpy2.mpfr(theta)
        if theta <= THETA_MIN:
            raise PlanError("theta must exceed 3/4", ["theta"])
        if theta > 1:
            raise PlanError(f"theta must not exceed 1, got {float(theta)}", ["theta"])
        sigma = mpq(1, 2 * k * (k - 1))
        gamma = 1 / (theta - THETA_MIN)
        rho = min(sigma / (8 * gamma), (theta - mpq(2, 3)) / 2) / 2
        U = x_f**gmpy2.mpfr(theta / 2 - rho)
        V = x_f**gmpy2.mpfr(1 - theta + 2 * rho)
    slack = side_conditions(theta, k, gamma, rho, sigma)
    failed = [name for name, value in slack.items() if value < 0]
    if U <= 1 or V <= 1:
        failed.append("U_V_above_one")
    if failed:
        raise PlanError(f"Plan side conditions failed at x = {float(x_q):.6g}: {', '.join(failed)}", failed)
    plan = VaughanPlan(
        x_q, y_f, k, theta, gamma, rho, sigma, U, V,
        c1 if c1 is not None else default_c1(k),
        {name: float(value) for name, value in slack.items()},
    )
    logger.info(f"Vaughan plan: theta={float(theta):.6f}, U={float(U):.6g}, V={float(V):.6g}")
    return plan


@dataclass
class CoefficientTable:
    """ Integer coefficients on (lo, hi]; values[i] belongs to n = lo + 1 + i. """
    kind: str
    lo: int
    hi: int
    values: np.ndarray

    def __getitem__(self, n: int) -> int:
        if not self.lo < n <= self.hi:
            return 0
        return int(self.values[n - self.lo - 1])

    def window(self, lo: int, hi: int) -> np.ndarray:
        """ Coefficients on (lo, hi], zero outside the support. """
        out = np.zeros(max(hi - lo, 0), dtype=np.int64)
        start, stop = max(lo, self.lo), min(hi, self.hi)
        if stop > start:
            out[start - lo: stop - lo] = self.values[start - self.lo: stop - self.lo]
        return out


def mobius_array(N: int) -> np.ndarray:
    """ mu(n) at index n for 0 <= n <= N, with mu(0) stored as 0. """
    values = np.zeros(N + 1, dtype=np.int64)
    if N >= 1:
        values[1:] = sieve_segment(0, N, ("mu",)).mu
    return values


def lambda0(v: int, U, V) -> int:
    """ Sum of mu(d) mu(m) over factorizations v = m d with d <= V, m <= U. """
    total = 0
    for d in utils.divisors(v):
        if d <= V and v // d <= U:
            total += utils.mobius(d) * utils.mobius(v // d)
    return total


def lambda1(u: int, V) -> int:
    """ Sum of mu(d) over divisors d > V of u. """
    return sum(utils.mobius(d) for d in utils.divisors(u) if d > V)


def lambda0_table(U, V, limit: Optional[int] = None) -> CoefficientTable:
    """
    lambda_0 on (0, floor(U) floor(V)], optionally capped at `limit`,
    as a Dirichlet convolution of the two truncated Mobius sequences.
    """
    U_int, V_int = utils.floor(utils.to_mpq(U)), utils.floor(utils.to_mpq(V))
    N = U_int * V_int
    if limit is not None:
        N = min(N, int(limit))
    mu = mobius_array(max(U_int, V_int, 1))
    values = np.zeros(N + 1, dtype=np.int64)
    for d in range(1, min(V_int, N) + 1):
        if mu[d] == 0:
            continue
        M = min(U_int, N // d)
        values[d: d * M + 1: d] += mu[d] * mu[1: M + 1]
    return CoefficientTable("lambda0", 0, N, values[1:])


def lambda1_table(lo: int, hi: int, V) -> CoefficientTable:
    """
    lambda_1 on (lo, hi], from sum_{d | u} mu(d) = [u = 1] minus the
    divisors d <= V.
    """
    lo, hi = int(lo), int(hi)
    V_int = utils.floor(utils.to_mpq(V))
    values = np.zeros(max(hi - lo, 0), dtype=np.int64)
    if hi <= lo:
        return CoefficientTable("lambda1", lo, lo, values)
    mu = mobius_array(min(V_int, hi))
    for d in range(1, min(V_int, hi) + 1):
        if mu[d] == 0:
            continue
        start = (lo // d + 1) * d
        values[start - lo - 1:: d] -= mu[d]
    if lo < 1 <= hi:
        values[-lo] += 1
    return CoefficientTable("lambda1", lo, hi, values)


def vaughan_identity_check(n: int, U, V, mu: Optional[np.ndarray] = None) -> bool:
    """
    Check mu(n) = - sum_{l m d = n, d <= V, m <= U} mu(d) mu(m)
                  + sum_{l m d = n, d > V, m > U} mu(d) mu(m)
    by enumerating the factorizations of n.

    Parameters
    ----------
    n : int
        Must exceed max(U, V)
    mu : np.ndarray, optional
        mu(m) at index m for every m <= n, to skip factorization

    Raises
    ------
    ArgumentError
        If n <= max(U, V)
    """
    n = int(n)
    if n <= max(U, V):
        raise ArgumentError(f"Vaughan's identity needs n > max(U, V); got n={n}.")
    mu_of = utils.mobius if mu is None else (lambda m: int(mu[m]))
    small, large = 0, 0
    for d in utils.divisors(n):
        mu_d = mu_of(d)
        if mu_d == 0:
            continue
        for m in utils.divisors(n // d):
            mu_m = mu_of(m)
            if mu_m == 0:
                continue
            if d <= V and m <= U:
                small += mu_d * mu_m
            elif d > V and m > U:
                large += mu_d * mu_m
    return mu_of(n) == -small + large


def _next_power_of_two(value: mpq) -> mpq:
    """ Smallest power of two strictly above `value` > 0. """
    power = mpq(1)
    if value >= 1:
        while power <= value:
            power *= 2
    else:
        while power / 2 > value:
            power /= 2
    return power


def dyadic_cover(lo, hi) -> List[Tuple]:
    """
    Split (lo, hi] at the powers of two it contains; every piece lies
    in a single (M, 2M].
    """
    lo_q, hi_q = utils.to_mpq(lo), utils.to_mpq(hi)
    if not 0 < lo_q < hi_q:
        raise ArgumentError(f"Need 0 < lo < hi, got lo={float(lo_q)}, hi={float(hi_q)}.")
    ranges = list()
    current = lo_q
    while current < hi_q:
        end = min(_next_power_of_two(current), hi_q)
        ranges.append((utils.integral(current), utils.integral(end)))
        current = end
    return ranges


def _dyadic_base(hi) -> mpq:
    """ M with (lo, hi] inside (M, 2M] for any piece of a dyadic cover. """
    hi = utils.to_mpq(hi)
    power = _next_power_of_two(hi)
    if power / 2 == hi:
        power = hi
    return power / 2


def _coefficient_values(coeffs: Coefficients, lo: int, hi: int) -> np.ndarray:
    """ Coefficients of the integers in (lo, hi] as an array. """
    if hi <= lo:
        return np.zeros(0)
    if isinstance(coeffs, CoefficientTable):
        return coeffs.window(lo, hi)
    if isinstance(coeffs, np.ndarray):
        out = np.zeros(hi - lo, dtype=coeffs.dtype)
        stop = min(hi + 1, coeffs.shape[0])
        if stop > lo + 1:
            out[: stop - lo - 1] = coeffs[lo + 1: stop]
        return out
    return np.array([coeffs(n) for n in range(lo + 1, hi + 1)])


def _unit_table(x, y, k, alpha, units: Optional[np.ndarray], budget: int) -> Tuple[int, int, np.ndarray]:
    lo, hi = utils.interval_bounds(x, y)
    if units is None:
        units = PhaseTable.build(x, y, k, alpha, budget=budget).units()
    elif units.shape != (hi - lo,):
        raise ArgumentError(f"Unit table of shape {units.shape} does not match ({lo}, {hi}].")
    return lo, hi, units


def type_I_sum(M, coeffs: Coefficients, x, y, k: int, alpha: PhaseReal,
               units: Optional[np.ndarray] = None, budget: int = BUDGET_TERMS) -> complex:
    """
    sum_{M < m <= 2M} a(m) sum_{x < m n <= x + y} e((m n)^k alpha)

    Parameters
    ----------
    M : real
        Dyadic scale
    coeffs : Callable, np.ndarray or CoefficientTable
        a(m); arrays are indexed by m itself
    units : np.ndarray, optional
        e(N^k alpha) for the integers N in (x, x + y]
    """
    return type_II_sum(M, coeffs, None, x, y, k, alpha, units, budget)


def type_II_sum(M, a: Coefficients, b: Optional[Coefficients], x, y, k: int, alpha: PhaseReal,
                units: Optional[np.ndarray] = None, budget: int = BUDGET_TERMS) -> complex:
    """
    sum_{M < m <= 2M} a(m) sum_{x < m n <= x + y} b(n) e((m n)^k alpha);
    b = None means b(n) = 1.
    """
    lo, hi, units = _unit_table(x, y, k, alpha, units, budget)
    M = utils.to_mpq(M)
    m_lo, m_hi = utils.floor(M), min(utils.floor(2 * M), hi)
    if m_hi <= m_lo or hi == lo:
        return 0j
    a_vals = _coefficient_values(a, m_lo, m_hi)
    b_vals = None if b is None else _coefficient_values(b, 0, hi // (m_lo + 1))
    inner = np.zeros(m_hi - m_lo, dtype=np.complex128)
    for index, m in enumerate(range(m_lo + 1, m_hi + 1)):
        if a_vals[index] == 0:
            continue
        n_lo, n_hi = lo // m, hi // m
        if n_hi <= n_lo:
            continue
        terms = units[(n_lo + 1) * m - lo - 1:: m][: n_hi - n_lo]
        inner[index] = terms.sum() if b_vals is None else (b_vals[n_lo: n_hi] * terms).sum()
    return compute.complex_sum(a_vals * inner)


@dataclass
class Reconstruction:
    """
    S_k computed directly and as -S1 + S2; the split fields are filled
    only when `reconstruct` is asked to split.
    """
    S1: complex
    S2: complex
    Sk_direct: complex
    residual: float
    S3_low: Optional[complex] = None
    S3_high: Optional[complex] = None
    S21: Optional[complex] = None
    S22: Optional[complex] = None

    def to_dict(self) -> dict:
        out = {"residual": self.residual}
        for name in ("S1", "S2", "Sk_direct", "S3_low", "S3_high", "S21", "S22"):
            value = getattr(self, name)
            if value is not None:
                out[name] = {"re": value.real, "im": value.imag, "abs": abs(value)}
        return out


def reconstruct(x, y, k: int, alpha: PhaseReal, plan: VaughanPlan, split: bool = False,
                budget: int = BUDGET_TERMS) -> Reconstruction:
    """
    Evaluate S_k(x, y; alpha) directly and through Vaughan's identity,

        S1 = sum_{v <= UV} lambda_0(v) sum_{x < l v <= x + y} e((l v)^k alpha)
        S2 = sum_{V < u <= (x + y)/U} lambda_1(u)
                 sum_{x < m u <= x + y, m > U} mu(m) e((m u)^k alpha)

    and report |(-S1 + S2) - S_k|. With `split`, S1 is also returned as
    its v <= V and V < v <= UV parts, and S2 as its u >= x^(1/2) and
    V < u < x^(1/2) parts.

    Raises
    ------
    ArgumentError
        If some n in the interval does not exceed max(U, V)
    """
    if plan.x != utils.to_mpq(x) or plan.k != int(k):
        raise ArgumentError(f"Plan was built for x={float(plan.x)}, k={plan.k}; got x={float(utils.to_mpq(x))}, k={k}.")
    lo, hi = utils.interval_bounds(x, y)
    if hi - lo > budget:
        raise ResourceError(f"{hi - lo} terms exceed the budget of {budget}.")
    if lo + 1 <= max(plan.U, plan.V):
        raise ArgumentError(
            f"Every n in ({lo}, {hi}] must exceed max(U, V) = {float(max(plan.U, plan.V)):.6g}."
        )
    units = PhaseTable.build(x, y, k, alpha, budget=budget).units()
    mu = sieve_segment(lo, hi - lo, ("mu",)).mu
    direct = compute.complex_sum(mu * units)

    V_int = utils.floor(utils.to_mpq(plan.V))
    low, high = list(), list()
    lam0 = lambda0_table(plan.U, plan.V, limit=hi)
    for v in np.flatnonzero(lam0.values) + 1:
        v = int(v)
        inner = units[(lo // v + 1) * v - lo - 1:: v].sum()
        (low if v <= V_int else high).append(lam0.values[v - 1] * inner)
    S3_low, S3_high = compute.complex_sum(low), compute.complex_sum(high)

    U_int = utils.floor(utils.to_mpq(plan.U))
    u_hi = utils.floor(mpq(hi) / utils.to_mpq(plan.U))
    x_q = utils.to_mpq(x)
    upper, lower = list(), list()
    if u_hi > V_int:
        lam1 = lambda1_table(V_int, u_hi, plan.V)
        mu_small = mobius_array(hi // (V_int + 1))
        for offset in np.flatnonzero(lam1.values):
            u = V_int + 1 + int(offset)
            m_lo, m_hi = max(lo // u, U_int), hi // u
            if m_hi <= m_lo:
                continue
            terms = units[(m_lo + 1) * u - lo - 1:: u][: m_hi - m_lo]
            inner = (mu_small[m_lo + 1: m_hi + 1] * terms).sum()
            (upper if u * u >= x_q else lower).append(lam1.values[offset] * inner)
    S21, S22 = compute.complex_sum(upper), compute.complex_sum(lower)

    S1, S2 = S3_low + S3_high, S21 + S22
    residual = abs((-S1 + S2) - direct)
    logger.debug(f"Reconstruction on ({lo}, {hi}]: residual {residual:.3e}")
    if not split:
        return Reconstruction(S1, S2, direct, residual)
    return Reconstruction(S1, S2, direct, residual, S3_low, S3_high, S21, S22)


def dyadic_type_sums(x, y, k: int, alpha: PhaseReal, plan: VaughanPlan, which: str = "S1",
                     budget: int = BUDGET_TERMS) -> complex:
    """
    S1 as a sum of type I sums, or S2 as a sum of type II sums, over a
    dyadic cover of the outer variable.
    """
    lo, hi, units = _unit_table(x, y, k, alpha, None, budget)
    if which == "S1":
        lam0 = lambda0_table(plan.U, plan.V, limit=hi)
        coeffs = np.concatenate([[0], lam0.values])
        cover = dyadic_cover(mpq(1, 2), max(lam0.hi, 1))
        b = None
    elif which == "S2":
        V_int = utils.floor(utils.to_mpq(plan.V))
        u_hi = utils.floor(mpq(hi) / utils.to_mpq(plan.U))
        if u_hi <= V_int:
            return 0j
        coeffs = np.zeros(u_hi + 1, dtype=np.int64)
        coeffs[V_int + 1:] = lambda1_table(V_int, u_hi, plan.V).values
        b = mobius_array(hi // (V_int + 1))
        b[: utils.floor(utils.to_mpq(plan.U)) + 1] = 0
        cover = dyadic_cover(plan.V, mpq(hi) / utils.to_mpq(plan.U))
    else:
        raise ArgumentError(f"Unknown sum {which!r}; use 'S1' or 'S2'.")
    pieces = list()
    for block_lo, block_hi in cover:
        mask = np.zeros_like(coeffs)
        start, stop = utils.floor(block_lo) + 1, min(utils.floor(block_hi), coeffs.shape[0] - 1)
        mask[start: stop + 1] = coeffs[start: stop + 1]
        pieces.append(type_II_sum(_dyadic_base(block_hi), mask, b, x, y, k, alpha, units, budget))
    return compute.complex_sum(pieces)
