from dataclasses import dataclass
from typing import List, Optional, Tuple

import gmpy2
from gmpy2 import mpq
from loguru import logger

from moblab import utils
from moblab.constants import ARC_PREC_BITS, default_c1
from moblab.exceptions import ClassificationError, ParameterError, PrecisionError
from moblab.phase import PhaseReal

ARC_LABELS = ("A", "B", "C")


def _floor_q(value: mpq) -> int:
    return int(value.numerator // value.denominator)


def _cf_convergents(value: mpq, q_max: int) -> List[Tuple[int, int]]:
    """ Convergents p/q of an exact rational with q <= q_max, in increasing q. """
    p_prev, q_prev = 1, 0
    a0 = _floor_q(value)
    p_curr, q_curr = a0, 1
    convergents = [(p_curr, q_curr)]
    remainder = value - a0
    while remainder != 0:
        value = 1 / remainder
        term = _floor_q(value)
        remainder = value - term
        p_prev, q_prev, p_curr, q_curr = p_curr, q_curr, term * p_curr + p_prev, term * q_curr + q_prev
        if q_curr > q_max:
            break
        convergents.append((int(p_curr), int(q_curr)))
    return convergents


def convergents(alpha: PhaseReal, q_max: int) -> List[Tuple[int, int]]:
    """
    Continued-fraction convergents a/q of alpha with q <= q_max.

    For a truncated irrational both ends of its uncertainty interval
    are expanded; every real in between shares their convergents only
    when the two lists agree.

    Raises
    ------
    PrecisionError
        If the uncertainty interval straddles a change in the list
    """
    q_max = int(q_max)
    if q_max < 1:
        raise ParameterError(f"q_max must be >= 1, got {q_max}.")
    if alpha.exact:
        return _cf_convergents(alpha.value, q_max)
    lower, upper = alpha.interval()
    result = _cf_convergents(lower, q_max)
    if result != _cf_convergents(upper, q_max):
        raise PrecisionError(
            f"{alpha.bits} bits cannot certify the convergents of alpha up to q = {q_max}."
        )
    return result


@dataclass(frozen=True)
class DirichletApprox:
    """
    alpha = a/q + lambda, with lambda exact relative to the stored value
    of alpha.
    """
    a: int
    q: int
    lam: mpq
    alpha: PhaseReal

    def to_dict(self) -> dict:
        return {"a": self.a, "q": self.q, "lambda": float(self.lam)}

    def complement(self) -> "DirichletApprox":
        """ The approximation (q - a, q, -lambda) of 1 - alpha. """
        return DirichletApprox(self.q - self.a, self.q, -self.lam, self.alpha.complement())


def _certified(alpha: PhaseReal, predicate) -> bool:
    """ Evaluate predicate(value) at both ends of alpha's interval; they must agree. """
    if alpha.exact:
        return predicate(alpha.value)
    lower, upper = alpha.interval()
    verdict = predicate(lower)
    if verdict != predicate(upper):
        raise PrecisionError(f"{alpha.bits} bits cannot decide an arc inequality for alpha.")
    return verdict


def dirichlet_approx(alpha: PhaseReal, bound) -> DirichletApprox:
    """
    The convergent a/q with the smallest q satisfying |q alpha - a| < 1/bound.
    The strict inequality sends exact rationals within the bound to
    themselves: 0.3 with bound 10 gives 3/10 rather than 1/3.

    Parameters
    ----------
    alpha : PhaseReal
        Value to approximate
    bound : real
        Dirichlet bound Q >= 1; any int, float, mpq or mpfr

    Returns
    -------
    DirichletApprox
        (a, q, lambda) with 1 <= q <= bound and |lambda| <= 1/(q bound)
    """
    bound = utils.to_mpq(bound)
    if bound < 1:
        raise ParameterError(f"Dirichlet bound must be >= 1, got {float(bound)}.")
    for a, q in convergents(alpha, _floor_q(bound)):
        if _certified(alpha, lambda v: abs(q * v - a) * bound < 1):
            return DirichletApprox(a, q, alpha.value - mpq(a, q), alpha)
    # the last convergent below the bound always qualifies
    raise PrecisionError("No convergent met the Dirichlet bound; alpha lacks precision.")


@dataclass(frozen=True)
class ArcParams:
    """
    P = L^c1, Q = x^(k-2) y^2 / P and R = x^(k-1) y with L = log x,
    held as 256-bit mpfr values.
    """
    x: mpq
    y: mpq
    k: int
    c1: float
    P: "gmpy2.mpfr"
    Q: "gmpy2.mpfr"
    R: "gmpy2.mpfr"
    L: "gmpy2.mpfr"

    def to_dict(self) -> dict:
        return {
            "x": float(self.x),
            "y": float(self.y),
            "k": self.k,
            "c1": float(self.c1),
            "P": float(self.P),
            "Q": float(self.Q),
            "R": float(self.R),
            "L": float(self.L),
        }


def arc_params(x, y, k: int, c1: Optional[float] = None) -> ArcParams:
    """
    Build the arc thresholds (P, Q, R).

    Raises
    ------
    ParameterError
        If k < 3, y lies outside [2, x], or P >= Q
    """
    k = int(k)
    if k < 3:
        raise ParameterError(f"k must be >= 3, got {k}.")
    if c1 is None:
        c1 = default_c1(k)
    if c1 < 0:
        raise ParameterError(f"c1 must be non-negative, got {c1}.")
    x_q, y_q = utils.to_mpq(x), utils.to_mpq(y)
    if not 2 <= y_q <= x_q:
        raise ParameterError(f"Need 2 <= y <= x, got x={float(x_q)}, y={float(y_q)}.")
    with utils.high_precision(ARC_PREC_BITS):
        x_f, y_f = gmpy2.mpfr(x_q), gmpy2.mpfr(y_q)
        L = gmpy2.log(x_f)
        P = L**gmpy2.mpfr(utils.to_mpq(c1))
        Q = x_f**(k - 2) * y_f**2 / P
        R = x_f**(k - 1) * y_f
    if P >= Q:
        raise ParameterError(
            f"P = {float(P):.6g} >= Q = {float(Q):.6g}; the interval is too short for c1 = {c1}."
        )
    return ArcParams(x_q, y_q, k, c1, P, Q, R, L)


@dataclass(frozen=True)
class ArcClass:
    label: str
    witness: DirichletApprox

    def to_dict(self) -> dict:
        return {"label": self.label, **self.witness.to_dict()}


def classify(alpha: PhaseReal, params: ArcParams) -> ArcClass:
    """
    Label alpha as A, B or C from its canonical witness
    dirichlet_approx(alpha, Q):

        A: q <= P and |lambda| <= 1/R
        B: q <= P and 1/R < |lambda| <= 1/(q Q)
        C: P < q <= Q and |lambda| <= 1/(q Q)

    Ties on |lambda| = 1/R fall to A; q = P falls to B over C.
    """
    witness = dirichlet_approx(alpha, params.Q)
    a, q = witness.a, witness.q
    P, Q, R = mpq(params.P), mpq(params.Q), mpq(params.R)
    small_q = q <= P
    within_r = _certified(alpha, lambda v: abs(v - mpq(a, q)) * R <= 1)
    within_q = _certified(alpha, lambda v: abs(v - mpq(a, q)) * q * Q <= 1)
    if small_q and within_r:
        label = "A"
    elif small_q and within_q:
        label = "B"
    elif q <= Q and within_q:
        label = "C"
    else:
        raise ClassificationError(
            f"Witness {a}/{q} of alpha = {alpha} satisfies none of the arc conditions."
        )
    logger.debug(f"alpha = {alpha} -> {label} with witness {a}/{q}")
    return ArcClass(label, witness)
