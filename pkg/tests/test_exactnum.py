import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from profinite_fa.exactnum import (
    INF,
    NotASquare,
    PadicNumber,
    PrecisionExhausted,
    ReciprocityViolation,
    hensel_sqrt,
    hilbert_symbol,
    padic_arith,
    rational_valuation,
    verify_product_formula,
)
from oracles import brute_hilbert

N = 20


def P(l, q, n=N):
    return PadicNumber.from_rational(q, l, n)


def test_mul_adds_valuations():
    x = PadicNumber(5, 1, 1, N)
    y = PadicNumber(5, 1, 4, N)
    z = padic_arith(x, y, "mul")
    assert z.valuation == 2 and z.unit % 5 == 4


def test_add_zero_is_identity():
    assert padic_arith(P(3, 1), PadicNumber.zero(3, N), "add") == P(3, 1)


def test_inverse_pair_is_exactly_one():
    z = padic_arith(PadicNumber(7, -1, 1, N), P(7, 7), "mul")
    assert z.valuation == 0 and z.unit == 1


def test_division_by_exact_zero():
    with pytest.raises(ZeroDivisionError):
        padic_arith(P(5, 3), PadicNumber.zero(5), "div")


def test_cancellation_gives_indistinguishable_zero():
    x = PadicNumber(3, 0, 1, 4)
    y = PadicNumber(3, 0, 1 + 81 * 7, 10)
    d = x - y
    assert d.is_zero() and not d.is_exact_zero
    assert d.valuation == 4
    with pytest.raises(PrecisionExhausted):
        d.exact_valuation()
    with pytest.raises(PrecisionExhausted):
        d.inverse()


def test_truncate_needs_precision():
    x = PadicNumber(5, 0, 7, 3)
    assert x.truncate(2) == 7
    with pytest.raises(PrecisionExhausted):
        x.truncate(5)


def test_hensel_sqrt_seven():
    r = hensel_sqrt(P(7, 2))
    assert r * r == P(7, 2)
    assert r.unit % 7 in (3, 4)


def test_hensel_sqrt_two_adic():
    r = hensel_sqrt(P(2, 17, 24))
    assert r * r == P(2, 17, 24)


@pytest.mark.parametrize("l,q", [(5, 5), (2, -1), (3, 2), (2, 3), (2, 5)])
def test_not_a_square(l, q):
    with pytest.raises(NotASquare):
        hensel_sqrt(P(l, q))


def test_two_adic_needs_three_digits():
    with pytest.raises(PrecisionExhausted):
        hensel_sqrt(PadicNumber(2, 0, 1, 2))


def test_squares_mod_8_criterion_matches_brute_force():
    # odd squares are exactly the units that are 1 mod 8
    squares = {x * x % 8 for x in range(1, 8, 2)}
    for u in range(1, 64, 2):
        try:
            hensel_sqrt(P(2, u))
            ok = True
        except NotASquare:
            ok = False
        assert ok == (u % 8 in squares)


primes = st.sampled_from([2, 3, 5, 7, 11])
nonzero = st.fractions(max_denominator=50).filter(lambda q: q != 0)


@settings(max_examples=200, deadline=None)
@given(primes, nonzero, nonzero)
def test_arith_agrees_with_rationals(l, x, y):
    for op, f in (("add", x + y), ("sub", x - y), ("mul", x * y), ("div", x / y)):
        z = padic_arith(P(l, x), P(l, y), op)
        if f == 0:
            assert z.is_zero()
        else:
            assert z == P(l, f)
            assert z.valuation == rational_valuation(f, l)


@settings(max_examples=100, deadline=None)
@given(primes, nonzero, nonzero)
def test_addition_precision_bound(l, x, y):
    a, b = PadicNumber.from_rational(x, l, 8), PadicNumber.from_rational(y, l, 12)
    s = a + b
    assert s.absolute_precision >= min(a.absolute_precision, b.absolute_precision)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([3, 5, 7, 13]), st.integers(1, 10**6))
def test_sqrt_of_square(l, n):
    r = hensel_sqrt(P(l, n * n))
    assert r * r == P(l, n * n)


def test_hilbert_real_place():
    assert hilbert_symbol(-1, -1, INF) == -1
    assert hilbert_symbol(-1, 3, INF) == 1


def test_hilbert_rational_arguments():
    assert hilbert_symbol(Fraction(-1, 4), -3, 3) == hilbert_symbol(-1, -3, 3)
    assert hilbert_symbol(Fraction(2, 3), 5, 5) == hilbert_symbol(6, 5, 5)


@pytest.mark.parametrize("place", [2, 3, 5, 7, INF])
def test_hilbert_against_brute_force_small(place):
    key = "inf" if place == INF else place
    for a in range(-12, 13):
        for b in range(-12, 13):
            if a and b:
                assert hilbert_symbol(a, b, place) == brute_hilbert(a, b, key), (a, b, place)


@settings(max_examples=200, deadline=None)
@given(st.integers(-500, 500).filter(bool), st.integers(-500, 500).filter(bool))
def test_product_formula(a, b):
    rep = verify_product_formula(a, b)
    assert rep.product == 1 and len(rep.ramified) % 2 == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(-60, 60).filter(bool), st.integers(-60, 60).filter(bool), st.sampled_from([2, 3, 5, 7]))
def test_hilbert_bilinear_and_symmetric(a, b, l):
    c = 7 if l != 7 else 3
    assert hilbert_symbol(a, b, l) == hilbert_symbol(b, a, l)
    assert hilbert_symbol(a, b * c, l) == hilbert_symbol(a, b, l) * hilbert_symbol(a, c, l)
    assert hilbert_symbol(a, -a, l) == 1


def test_product_formula_report_json():
    js = verify_product_formula(-1, -3).to_json()
    assert js["ramified"] == ["inf", "3"] and js["product"] == 1


def test_reciprocity_violation_is_an_assertion():
    assert issubclass(ReciprocityViolation, AssertionError)


def test_exact_zero_valuation():
    assert PadicNumber.zero(5).valuation == math.inf
