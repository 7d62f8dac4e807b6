"""
Dirichlet characters stored as exponent vectors.

The unit group mod q is split into cyclic factors: one per odd prime
power p^e (generated by a primitive root), and for 2^e the factors
{-1} (e >= 2) and <5> of order 2^(e-2) (e >= 3). A character is an
exponent vector (e_1, ..., e_r) with 0 <= e_j < o_j, and

    chi(n) = zeta_L^(sum_j e_j l_j(n) L / o_j),

where l_j(n) is the discrete log of n in factor j and L is the group
exponent. All identities are checked on these integer exponents.
"""

import itertools
import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from moblab import utils
from moblab.constants import BUDGET_TERMS, CHARACTER_MAX_MODULUS, EPS
from moblab.exceptions import ArgumentError, ResourceError
from moblab.expsum import twisted_expsum
from moblab.phase import PhaseReal
from moblab.sieve import ArithSegment, sieve_segment


@dataclass(frozen=True)
class CyclicFactor:
    """ One cyclic factor of the unit group: prime p, its power in q, generator order and log table. """
    p: int
    e: int
    kind: str
    order: int
    table: np.ndarray

    @property
    def modulus(self) -> int:
        return self.p**self.e


def _primitive_root(p: int) -> int:
    if p == 2:
        return 1
    phi = p - 1
    factors = list(utils.factorize(phi))
    for g in range(2, p):
        if all(pow(g, phi // f, p) != 1 for f in factors):
            return g
    raise ArgumentError(f"No primitive root found mod {p}.")


def _odd_factor(p: int, e: int) -> CyclicFactor:
    m = p**e
    g = _primitive_root(p)
    if e > 1 and pow(g, p - 1, p * p) == 1:
        g += p
    order = (p - 1) * p**(e - 1)
    table = np.full(m, -1, dtype=np.int64)
    value = 1
    for j in range(order):
        table[value] = j
        value = value * g % m
    return CyclicFactor(p, e, "cyclic", order, table)


def _two_factors(e: int) -> List[CyclicFactor]:
    m = 2**e
    if e == 1:
        return list()
    if e == 2:
        table = np.array([-1, 0, -1, 1], dtype=np.int64)
        return [CyclicFactor(2, e, "sign", 2, table)]
    order = 2**(e - 2)
    sign = np.full(m, -1, dtype=np.int64)
    five = np.full(m, -1, dtype=np.int64)
    value = 1
    for b in range(order):
        sign[value], five[value] = 0, b
        sign[m - value], five[m - value] = 1, b
        value = value * 5 % m
    return [CyclicFactor(2, e, "sign", 2, sign), CyclicFactor(2, e, "five", order, five)]


def _valuation(n: int, p: int) -> int:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True)
class DirichletCharacter:
    """
    A single character mod `modulus`; `value_exps[n]` is the exponent
    of zeta_L at n, or -1 when gcd(n, modulus) > 1.
    """
    modulus: int
    index: int
    exponent: int
    value_exps: np.ndarray
    conductor: int

    @property
    def primitive(self) -> bool:
        return self.conductor == self.modulus

    @property
    def is_principal(self) -> bool:
        return bool(np.all(self.value_exps[self.value_exps >= 0] == 0))

    @property
    def order(self) -> int:
        units = self.value_exps[self.value_exps >= 0]
        return self.exponent // math.gcd(self.exponent, int(np.gcd.reduce(units)) if units.size else 0)

    @property
    def parity(self) -> int:
        """ chi(-1) as +1 or -1. """
        exp = int(self.value_exps[(self.modulus - 1) % self.modulus])
        return 1 if exp == 0 else -1

    def values(self) -> np.ndarray:
        """ chi(n) for n = 0, ..., modulus - 1 as complex numbers. """
        values = np.exp(2j * np.pi * self.value_exps / self.exponent)
        values[self.value_exps < 0] = 0.0
        return values

    def __call__(self, n: int) -> complex:
        exp = int(self.value_exps[int(n) % self.modulus])
        if exp < 0:
            return 0j
        return complex(np.exp(2j * np.pi * exp / self.exponent))


@dataclass
class CharacterTable:
    """
    The phi(q) characters mod q, indexed by exponent vectors in
    lexicographic order; index 0 is the principal character.
    """
    modulus: int
    exponent: int
    factors: List[CyclicFactor]
    logs: np.ndarray
    exponents: np.ndarray
    conductors: np.ndarray

    def __len__(self) -> int:
        return self.exponents.shape[0]

    def __repr__(self) -> str:
        return f"CharacterTable(q={self.modulus}, {len(self)} characters, {int(self.primitive_flags.sum())} primitive)"

    @property
    def orders(self) -> np.ndarray:
        return np.array([f.order for f in self.factors], dtype=np.int64)

    @property
    def primitive_flags(self) -> np.ndarray:
        return self.conductors == self.modulus

    @property
    def units(self) -> np.ndarray:
        return np.gcd(np.arange(self.modulus), self.modulus) == 1

    def primitive_indices(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.primitive_flags)]

    def exponent_row(self, index: int) -> np.ndarray:
        scaled = self.exponents[index] * (self.exponent // self.orders)
        row = (self.logs @ scaled) % self.exponent
        row[~self.units] = -1
        return row

    def exponent_matrix(self) -> np.ndarray:
        """ Exponents of every character at every residue, shape (phi(q), q). """
        scaled = self.exponents * (self.exponent // self.orders)[None, :]
        matrix = (scaled @ self.logs.T) % self.exponent
        matrix[:, ~self.units] = -1
        return matrix

    def character(self, index: int) -> DirichletCharacter:
        return DirichletCharacter(
            self.modulus, int(index), self.exponent, self.exponent_row(index), int(self.conductors[index])
        )

    @property
    def chars(self) -> List[DirichletCharacter]:
        return [self.character(i) for i in range(len(self))]

    def check_orthogonality(self) -> bool:
        """
        Both orthogonality relations, evaluated exactly on exponents:
        sum over n of chi(n) conj(psi(n)) = phi(q) [chi = psi] and
        sum over chi of chi(m) conj(chi(n)) = phi(q) [m = n] on units.
        """
        matrix = self.exponent_matrix()
        phi = len(self)
        unit_cols = matrix[:, self.units]
        identity = phi * np.eye(phi, dtype=np.int64)
        for i in range(phi):
            diffs = (unit_cols[i][None, :] - unit_cols) % self.exponent
            if not np.array_equal(exact_unit_sums(diffs, self.exponent), identity[i]):
                return False
        columns = unit_cols.T
        for m in range(columns.shape[0]):
            diffs = (columns[m][None, :] - columns) % self.exponent
            if not np.array_equal(exact_unit_sums(diffs, self.exponent), identity[m]):
                return False
        return True


def exact_unit_sums(exps: np.ndarray, L: int) -> np.ndarray:
    """
    Exact value of sum_j zeta_L^exps[i, j] for each row i, ignoring
    entries equal to -1. Every row must be uniform over a subgroup of
    the L-th roots of unity (true for values of a homomorphism); such
    a row sums to its length when the subgroup is trivial and to zero
    otherwise.

    Raises
    ------
    ArgumentError
        If a row is not uniform over a subgroup
    """
    exps = np.atleast_2d(exps)
    rows = exps.shape[0]
    valid = exps >= 0
    offsets = (np.arange(rows)[:, None] * L + exps)[valid]
    counts = np.bincount(offsets, minlength=rows * L).reshape(rows, L)
    support = counts > 0
    size = support.sum(axis=1)
    total = counts.sum(axis=1)
    nonempty = size > 0
    safe = np.where(nonempty, size, 1)
    step = L // safe
    expected = (np.arange(L)[None, :] % step[:, None]) == 0
    uniform = (L % safe == 0) & np.all(support == expected, axis=1) & (counts.max(axis=1) * safe == total)
    if not np.all(uniform | ~nonempty):
        raise ArgumentError("Exponent rows are not uniform over a subgroup of the roots of unity.")
    return np.where(size == 1, total, 0).astype(np.int64)


def _conductors(factors: List[CyclicFactor], exponents: np.ndarray) -> np.ndarray:
    conductors = np.ones(exponents.shape[0], dtype=np.int64)
    for j, factor in enumerate(factors):
        column = exponents[:, j]
        if factor.kind == "cyclic":
            for row in np.flatnonzero(column):
                order = factor.order // math.gcd(int(column[row]), factor.order)
                conductors[row] *= factor.p**(1 + _valuation(order, factor.p))
        elif factor.kind == "sign":
            has_five = j + 1 < len(factors) and factors[j + 1].kind == "five"
            five = exponents[:, j + 1] if has_five else np.zeros_like(column)
            sign_only = (five == 0) & (column != 0)
            conductors[sign_only] *= 4
            if has_five:
                order5 = factors[j + 1].order
                for row in np.flatnonzero(five):
                    order = order5 // math.gcd(int(five[row]), order5)
                    conductors[row] *= 2**(_valuation(order, 2) + 2)
    return conductors


def characters_mod(q: int, max_modulus: int = CHARACTER_MAX_MODULUS) -> CharacterTable:
    """
    Build the full character table mod q.

    Parameters
    ----------
    q : int
        Modulus, 1 <= q <= max_modulus

    Returns
    -------
    CharacterTable
        phi(q) characters with conductors and primitivity flags

    Raises
    ------
    ResourceError
        If q exceeds `max_modulus`
    """
    q = int(q)
    if q < 1:
        raise ArgumentError(f"Modulus must be positive, got {q}.")
    if q > max_modulus:
        raise ResourceError(f"Modulus {q} exceeds the character table budget {max_modulus}.")
    factors = list()
    for p, e in utils.factorize(q).items():
        factors.extend(_two_factors(e) if p == 2 else [_odd_factor(p, e)])
    residues = np.arange(q)
    logs = np.zeros((q, len(factors)), dtype=np.int64)
    for j, factor in enumerate(factors):
        logs[:, j] = factor.table[residues % factor.modulus]
    orders = [f.order for f in factors]
    exponent = utils.lcm(*orders)
    vectors = list(itertools.product(*[range(o) for o in orders]))
    exponents = np.array(vectors, dtype=np.int64).reshape(len(vectors), len(factors))
    conductors = _conductors(factors, exponents)
    table = CharacterTable(q, exponent, factors, logs, exponents, conductors)
    logger.debug(f"Built {table}")
    return table


def primitive_count(q: int) -> int:
    """ Number of primitive characters mod q, sum over d | q of mu(d) phi(q/d). """
    return sum(utils.mobius(d) * utils.totient(q // d) for d in utils.divisors(q))


def twisted_mobius_sum(x, y, q: int, d: int, chi: DirichletCharacter, k: int, lam: PhaseReal,
                       segment: Optional[ArithSegment] = None, budget: int = BUDGET_TERMS) -> complex:
    """
    S_k(chi) = sum over x/d < m <= (x + y)/d with (m, q) = 1 of
    mu(m) chi(m) e(m^k d^k lambda).

    Parameters
    ----------
    x, y
        The outer interval (x, x + y]
    q : int
        Modulus of the reduction
    d : int
        Divisor of q
    chi : DirichletCharacter
        Character whose modulus divides q
    k : int
        Power
    lam : PhaseReal
        The remainder lambda
    segment : ArithSegment, optional
        Pre-sieved mu covering (x/d, (x + y)/d]
    """
    q, d = int(q), int(d)
    if d < 1 or q % d:
        raise ArgumentError(f"{d} does not divide {q}.")
    if q % chi.modulus:
        raise ArgumentError(f"Character modulus {chi.modulus} does not divide {q}.")
    lo, hi = utils.scaled_bounds(x, utils.to_mpq(x) + utils.to_mpq(y), d)
    if hi <= lo:
        return 0j
    if segment is None:
        segment = sieve_segment(lo, hi - lo, ("mu",))
    mu = segment.window(lo, hi).get("mu")
    m = np.arange(lo + 1, hi + 1, dtype=np.int64)
    chi_values = chi.values()[m % chi.modulus]
    weights = mu * chi_values * (np.gcd(m, q) == 1)
    beta = lam.scaled(d**k)
    return twisted_expsum(lo, hi - lo, k, beta, weights, budget).sum


def _abs_twisted(args) -> float:
    x, y, q, d, chi, k, lam, segment = args
    return abs(twisted_mobius_sum(x, y, q, d, chi, k, lam, segment))


def lemma31_terms(x, y, k: int, q: int, lam: PhaseReal, workers: int = 1
                  ) -> List[Tuple[int, Optional[int], float]]:
    """
    For each d | q, the largest |S_k(chi)| over primitive chi mod q/d,
    as (d, character index, value). Ties keep the lowest index; a
    modulus without primitive characters gives (d, None, 0.0).
    """
    tasks, owners = list(), list()
    for d in utils.divisors(q):
        table = characters_mod(q // d)
        lo, hi = utils.scaled_bounds(x, utils.to_mpq(x) + utils.to_mpq(y), d)
        segment = sieve_segment(lo, hi - lo, ("mu",)) if hi > lo else None
        for index in table.primitive_indices():
            tasks.append((x, y, q, d, table.character(index), k, lam, segment))
            owners.append((d, index))
    if workers > 1 and len(tasks) > 1:
        with Pool(workers) as pool:
            values = pool.map(_abs_twisted, tasks)
    else:
        values = [_abs_twisted(task) for task in tasks]
    best = {d: (None, 0.0) for d in utils.divisors(q)}
    for (d, index), value in zip(owners, values):
        if best[d][0] is None or value > best[d][1]:
            best[d] = (index, value)
    return [(d, index, value) for d, (index, value) in best.items()]


def lemma31_rhs(x, y, k: int, q: int, a: int, lam: PhaseReal, eps: float = EPS,
                workers: int = 1, terms: Optional[List[Tuple[int, Optional[int], float]]] = None) -> float:
    """
    q^(1 - 1/k + eps) times the sum over d | q of the largest
    |S_k(chi)| over primitive chi mod q/d; `terms` from `lemma31_terms`
    may be passed in to skip recomputing them.
    """
    q, a = int(q), int(a)
    if q < 1 or math.gcd(a, q) != 1:
        raise ArgumentError(f"Need q >= 1 and gcd(a, q) = 1, got a={a}, q={q}.")
    if terms is None:
        terms = lemma31_terms(x, y, k, q, lam, workers)
    return q**(1.0 - 1.0 / k + eps) * math.fsum(value for _, _, value in terms)
