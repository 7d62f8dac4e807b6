from dataclasses import dataclass, field
from typing import Callable, Tuple

import gmpy2
from gmpy2 import mpq, mpz

from moblab import utils
from moblab.constants import GUARD_BITS, MIN_PREC_BITS
from moblab.exceptions import ArgumentError, PrecisionError


@dataclass(frozen=True)
class PhaseReal:
    """
    A real phase alpha held as an exact rational `value` together with
    an uncertainty `radius`: the true alpha lies in
    [value - radius, value + radius]. Exact inputs (a/q fractions,
    decimal strings, floats) have radius zero and satisfy the
    precision contract at any size; truncated irrationals have
    radius 2^-bits.

    Parameters
    ----------
    value : mpq
        Stored rational value
    bits : int
        Nominal precision in bits
    radius : mpq
        Half-width of the uncertainty interval around `value`
    """
    value: mpq
    bits: int = MIN_PREC_BITS
    radius: mpq = field(default_factory=lambda: mpq(0))

    def __post_init__(self):
        if self.bits < 1:
            raise ArgumentError(f"Precision must be positive, got {self.bits} bits.")
        if self.radius < 0:
            raise ArgumentError("Uncertainty radius cannot be negative.")

    @classmethod
    def from_fraction(cls, a: int, q: int, bits: int = MIN_PREC_BITS):
        if q < 1:
            raise ArgumentError(f"Denominator must be positive, got {q}.")
        return cls(mpq(a, q), bits)

    @classmethod
    def from_string(cls, text: str, bits: int = MIN_PREC_BITS):
        """
        Parse "a/q" or a decimal string ("0.3", "1e-9") as its exact
        rational value.
        """
        return cls(utils.to_mpq(text), bits)

    @classmethod
    def from_float(cls, value: float, bits: int = MIN_PREC_BITS):
        return cls(utils.to_mpq(float(value)), bits)

    @classmethod
    def from_function(cls, func: Callable, bits: int):
        """
        Evaluate `func` under an mpfr context with `bits` plus guard
        bits of working precision and keep the value truncated to a
        dyadic rational with `bits` fractional bits.

        Parameters
        ----------
        func : Callable
            Zero-argument callable returning an mpfr, e.g.
            lambda: (gmpy2.sqrt(5) - 1) / 2
        bits : int
            Fractional bits kept
        """
        with utils.high_precision(bits + GUARD_BITS):
            value = gmpy2.mpfr(func())
            scaled = gmpy2.floor(value * (mpz(1) << bits))
        return cls(mpq(mpz(scaled), mpz(1) << bits), bits, mpq(1, mpz(1) << bits))

    @staticmethod
    def required_bits(x, y, k: int) -> int:
        """ Bits needed to evaluate frac(n^k alpha) for every n <= x + y. """
        top = max(utils.floor(utils.to_mpq(x) + utils.to_mpq(y)), 1)
        return k * top.bit_length() + GUARD_BITS

    @property
    def exact(self) -> bool:
        return self.radius == 0

    @property
    def numerator(self) -> mpz:
        return self.value.numerator

    @property
    def denominator(self) -> mpz:
        return self.value.denominator

    def reduced(self) -> "PhaseReal":
        """ The same phase moved into [0, 1). """
        shift = self.numerator // self.denominator
        if shift == 0:
            return self
        return PhaseReal(self.value - shift, self.bits, self.radius)

    def complement(self) -> "PhaseReal":
        """ 1 - alpha """
        return PhaseReal(1 - self.value, self.bits, self.radius)

    def shifted(self, other: "PhaseReal") -> "PhaseReal":
        return PhaseReal(
            self.value + other.value, min(self.bits, other.bits), self.radius + other.radius
        )

    def scaled(self, factor: int) -> "PhaseReal":
        """ factor * alpha; the uncertainty grows by |factor|. """
        factor = int(factor)
        bits = max(self.bits - abs(factor).bit_length(), 1) if not self.exact else self.bits
        return PhaseReal(self.value * factor, bits, self.radius * abs(factor))

    def interval(self) -> Tuple[mpq, mpq]:
        return self.value - self.radius, self.value + self.radius

    def phase_error(self, n_max: int, k: int) -> float:
        """ Bound on |frac(n^k alpha) - frac(n^k value)| for n <= n_max. """
        if self.exact:
            return 0.0
        return float(self.radius * mpz(n_max)**k)

    def check_contract(self, n_max: int, k: int):
        """
        Raise `PrecisionError` unless n^k times the uncertainty stays
        below 2^-64 for every n <= n_max.
        """
        if self.exact:
            return
        if self.radius * mpz(max(int(n_max), 1))**k > mpq(1, mpz(1) << GUARD_BITS):
            need = k * max(int(n_max), 1).bit_length() + GUARD_BITS
            raise PrecisionError(
                f"Phase carries {self.bits} bits; n^k with n <= {n_max}, k = {k} needs {need}."
            )

    def to_string(self) -> str:
        if self.exact:
            if self.denominator == 1:
                return str(self.numerator)
            return f"{self.numerator}/{self.denominator}"
        return f"{float(self.value):.17g}"

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        return self.to_string()


NAMED_PHASES = {
    "golden": lambda: (gmpy2.sqrt(5) - 1) / 2,
    "sqrt2": lambda: gmpy2.sqrt(2),
    "e": lambda: gmpy2.exp(1),
    "pi": lambda: gmpy2.const_pi(),
}


def parse_phase(text: str, bits: int = MIN_PREC_BITS) -> PhaseReal:
    """
    Read a phase from the command line: "a/q" and decimal strings are
    exact, while the names in NAMED_PHASES are truncated irrationals
    carrying `bits` fractional bits.
    """
    text = str(text).strip()
    if text.lower() in NAMED_PHASES:
        return PhaseReal.from_function(NAMED_PHASES[text.lower()], bits)
    return PhaseReal.from_string(text, bits)
