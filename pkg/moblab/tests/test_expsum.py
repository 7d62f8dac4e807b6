import cmath
import math

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpq
from sympy import divisor_count

from moblab import file_io, utils
from moblab.exceptions import ArgumentError, ResourceError
from moblab.expsum import (
    PhaseTable,
    frac_nk_alpha,
    gauss_bound_constant,
    gauss_sum,
    major_arc_term,
    mangoldt_expsum,
    mobius_expsum,
    r_poly,
    twisted_expsum,
    w_k,
    weyl_sum,
    wk_sum_lemma37,
    wk_sum_lemma37_shifted,
)
from moblab.phase import PhaseReal
from moblab.sieve import sieve_segment


def _e(t):
    return cmath.exp(2j * math.pi * t)


def test_frac_nk_alpha():
    assert frac_nk_alpha(2, 3, PhaseReal.from_fraction(1, 8)) == 0.
    assert np.round(abs(frac_nk_alpha(10, 3, PhaseReal.from_fraction(1, 7)) - 6 / 7), 15) == 0.
    assert frac_nk_alpha(3, 4, PhaseReal.from_string("0.5")) == 0.5


def test_weyl_sum_examples():
    result = weyl_sum(mpq(21, 2), 100, 3, PhaseReal.from_fraction(0, 1))
    assert result.sum == 100
    result = weyl_sum(100, 50, 3, PhaseReal.from_fraction(1, 3))
    # 16 integers n = 1 mod 3 and 17 in each other class
    expected = 16 * _e(1 / 3) + 17 * _e(2 / 3) + 17
    assert abs(result.sum - expected) < 1e-10
    direct = sum(_e(float(mpq(n**3, 3) % 1)) for n in range(101, 151))
    assert abs(result.sum - direct) < 1e-10
    assert result.n_terms == 50


def test_full_period_is_gauss_sum():
    for k in (3, 4):
        for q in range(1, 80):
            for a in range(1, q + 1):
                if math.gcd(a, q) != 1:
                    continue
                complete = weyl_sum(0, q, k, PhaseReal.from_fraction(a, q)).sum
                assert abs(complete - gauss_sum(q, a, k)) < 1e-9 * q


def test_bigint_path_matches_direct():
    # denominators above 2^31 go through the wide-integer reduction
    alpha = PhaseReal(mpq(123456789123, 2**40 + 15))
    result = weyl_sum(10**5, 300, 3, alpha)
    direct = sum(
        _e(float(mpq(n**3 * alpha.numerator % alpha.denominator, alpha.denominator)))
        for n in range(10**5 + 1, 10**5 + 301)
    )
    assert abs(result.sum - direct) < 1e-9
    assert result.err_bound < 1e-9


def test_irrational_phase_error_bound():
    bits = PhaseReal.required_bits(10**5, 1000, 3)
    golden = PhaseReal.from_function(lambda: (gmpy2.sqrt(5) - 1) / 2, bits)
    result = weyl_sum(10**5, 1000, 3, golden)
    with utils.high_precision(300):
        truth = (gmpy2.sqrt(5) - 1) / 2
        direct = sum(
            _e(float(gmpy2.frac(gmpy2.mpfr(n)**3 * truth))) for n in range(10**5 + 1, 10**5 + 1001)
        )
    assert abs(result.sum - direct) <= result.err_bound + 1e-9


def test_mobius_expsum_examples():
    segment = sieve_segment(10, 6)
    zero = mobius_expsum(10, 6, 3, PhaseReal.from_fraction(0, 1), segment)
    assert zero.sum == 0
    half = mobius_expsum(10, 6, 3, PhaseReal.from_fraction(1, 2), segment)
    assert abs(half.sum - 2) < 1e-12
    wide = sieve_segment(0, 1000)
    mertens = mobius_expsum(100, 400, 5, PhaseReal.from_fraction(0, 1), wide)
    assert mertens.sum == int(wide.mu[100:500].sum())
    with pytest.raises(ArgumentError):
        mobius_expsum(2000, 10, 3, PhaseReal.from_fraction(0, 1), wide)


def test_twisted_reductions():
    alpha = PhaseReal.from_fraction(5, 13)
    segment = sieve_segment(500, 200)
    ones = twisted_expsum(500, 200, 3, alpha, np.ones(200))
    assert abs(ones.sum - weyl_sum(500, 200, 3, alpha).sum) < 1e-12
    twisted = twisted_expsum(500, 200, 3, alpha, segment.mu.astype(float))
    assert abs(twisted.sum - mobius_expsum(500, 200, 3, alpha, segment).sum) < 1e-12
    lam = mangoldt_expsum(10, 6, 3, PhaseReal.from_fraction(0, 1), sieve_segment(10, 6))
    assert abs(lam.sum - (math.log(11) + math.log(13) + math.log(2))) < 1e-12
    with pytest.raises(ArgumentError):
        twisted_expsum(500, 200, 3, alpha, np.ones(10))


def test_shared_table():
    alpha = PhaseReal.from_fraction(3, 11)
    table = PhaseTable.build(1000, 500, 3, alpha)
    assert weyl_sum(1000, 500, 3, alpha, table=table).sum == weyl_sum(1000, 500, 3, alpha).sum
    with pytest.raises(ArgumentError):
        weyl_sum(1000, 400, 3, alpha, table=table)


def test_budget():
    with pytest.raises(ResourceError):
        weyl_sum(0, 1000, 3, PhaseReal.from_fraction(1, 3), budget=10)


def test_gauss_sum():
    assert gauss_sum(1, 1, 3) == 1
    assert abs(gauss_sum(2, 1, 3)) < 1e-12
    assert abs(gauss_sum(3, 1, 3)) < 1e-12
    for q in (60, 210, 360, 1001, 2 * 3**4 * 7):
        for a in (1, 7, 13):
            if math.gcd(a, q) == 1:
                assert abs(gauss_sum(q, a, 3, "crt") - gauss_sum(q, a, 3, "direct")) < 1e-9 * q
    with pytest.raises(ArgumentError):
        gauss_sum(4, 2, 3)


def test_w_k():
    assert float(w_k(1, 3)) == 1.
    assert np.round(abs(float(w_k(2, 3)) - 3 / math.sqrt(2)), 12) == 0.
    assert float(w_k(8, 3)) == 0.5
    assert np.round(abs(float(w_k(16, 3)) - 3 * 2**-1.5), 12) == 0.
    assert np.round(abs(float(w_k(6, 3)) - 9 / math.sqrt(6)), 12) == 0.
    # multiplicative over coprime moduli
    assert np.round(abs(float(w_k(8 * 27, 4)) - float(w_k(8, 4)) * float(w_k(27, 4))), 12) == 0.


def test_w_k_multiplicative():
    for k in (3, 4):
        for q1 in range(2, 101):
            for q2 in range(q1 + 1, 10**4 // q1 + 1):
                if math.gcd(q1, q2) != 1:
                    continue
                product = float(w_k(q1, k)) * float(w_k(q2, k))
                assert np.round(abs(float(w_k(q1 * q2, k)) / product - 1), 12) == 0.


def test_weyl_conjugation():
    rng = np.random.default_rng(3)
    alphas = [PhaseReal.from_fraction(a, q) for q in range(1, 31) for a in range(q) if math.gcd(a, q) == 1]
    alphas.extend(PhaseReal(mpq(int(m), 2**60)) for m in rng.integers(0, 2**60, 20))
    for alpha in alphas:
        forward = weyl_sum(10**5, 500, 3, alpha).sum
        mirror = weyl_sum(10**5, 500, 3, alpha.complement()).sum
        assert abs(forward - mirror.conjugate()) < 1e-9


def test_residue_class_decomposition():
    rng = np.random.default_rng(17)
    for _ in range(100):
        x, y, q = int(rng.integers(0, 10**4 + 1)), int(rng.integers(1, 10**4 + 1)), int(rng.integers(1, 31))
        a = int(rng.integers(0, q))
        while math.gcd(a, q) != 1:
            a = (a + 1) % q
        by_class = sum(
            _e((a * r**3 % q) / q) * ((x + y - r) // q - (x - r) // q)
            for r in range(q)
        )
        result = weyl_sum(x, y, 3, PhaseReal.from_fraction(a, q))
        assert abs(result.sum - by_class) <= 1e-8 * y


def test_gauss_bound():
    constant = gauss_bound_constant(60, 3)
    for q in range(1, 61):
        for a in range(1, q + 1):
            if math.gcd(a, q) == 1:
                assert abs(gauss_sum(q, a, 3)) <= constant * q * float(w_k(q, 3)) + 1e-9


def test_major_arc_term():
    alpha = PhaseReal.from_fraction(2, 5)
    assert np.round(abs(major_arc_term(5, 2, alpha, 10**4, 10**3, 3) - float(w_k(5, 3)) * 1000), 9) == 0.
    assert major_arc_term(1, 0, PhaseReal.from_fraction(0, 1), 100, 50, 3) == 50.
    alpha = PhaseReal(mpq(1, 2) + mpq(1, 10**11))
    expected = 3 / math.sqrt(2) * 1000 / 2
    assert np.round(abs(major_arc_term(2, 1, alpha, 10**4, 10**3, 3) - expected), 9) == 0.


def test_r_poly():
    assert r_poly(1, 1, 3) == 7
    assert r_poly(2, 3, 3) == 39
    for n, h, k in ((10, 7, 3), (123, 45, 5), (10**6, 99, 4)):
        assert h * r_poly(n, h, k) + n**k == (n + h)**k
    with pytest.raises(ResourceError):
        r_poly(10**20, 1, 8)


def _wk_brute(N, q, j, k, c):
    return math.fsum(
        int(divisor_count(n))**c * float(w_k(q // math.gcd(q, n**j), k)) for n in range(N + 1, 2 * N + 1)
    )


def test_wk_sum_lemma37():
    assert wk_sum_lemma37(1, 1, 1, 3, 2) == 4.
    assert np.round(abs(wk_sum_lemma37(2, 2, 1, 3, 0) - (3 / math.sqrt(2) + 1)), 12) == 0.
    assert np.round(abs(wk_sum_lemma37(10, 8, 3, 3, 1) - _wk_brute(10, 8, 3, 3, 1)), 9) == 0.
    assert np.round(abs(wk_sum_lemma37(500, 72, 2, 4, 2) - _wk_brute(500, 72, 2, 4, 2)), 6) == 0.


def test_wk_sum_shifted():
    N, q, h, k, c = 200, 36, 5, 3, 1
    brute = math.fsum(
        (int(divisor_count(n)) * int(divisor_count(n + h)))**c
        * float(w_k(q // math.gcd(q, ((n + h)**k - n**k) // h), k))
        for n in range(N + 1, 2 * N + 1)
        if math.gcd(n, h) == 1
    )
    assert np.round(abs(wk_sum_lemma37_shifted(N, q, h, k, c) - brute), 6) == 0.


@pytest.mark.slow
def test_gauss_bound_baseline():
    for k in (3, 4):
        for q in range(1, 501):
            for a in range(1, q + 1):
                if math.gcd(a, q) == 1:
                    complete = weyl_sum(0, q, k, PhaseReal.from_fraction(a, q)).sum
                    assert abs(complete - gauss_sum(q, a, k)) < 1e-9 * q
    for k in (3, 4):
        constant = gauss_bound_constant(2000, k)
        assert file_io.check_baseline(f"gauss_bound_constant_k{k}_q2000", constant, "max", 1e-9)
