"""Interval scaffolding: exact endpoints, enclosures, ladders."""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplitz_forge.errors import DigitBudgetExceeded, PrecisionExhausted
from toeplitz_forge.rigor import (
    Bounds,
    Dyad,
    Magnitude,
    decide,
    iv_fraction,
    least_multiple_exceeding,
    log_factorial,
    log_of_int,
    snapshot,
    working_precision,
)


# ---------------------------------------------------------------------------
# Dyadic endpoints and bounds
# ---------------------------------------------------------------------------


def test_dyad_fraction_views():
    assert Dyad(3, 2).as_fraction() == 12
    assert Dyad(-5, -3).as_fraction() == Fraction(-5, 8)
    assert float(Dyad(1, -1).as_mpf()) == 0.5


@given(st.integers(-(10 ** 30), 10 ** 30), st.integers(-200, 200))
def test_dyad_text_round_trip(man, exp):
    d = Dyad(man, exp)
    assert Dyad.parse(str(d)) == d


def test_bounds_reject_inverted():
    with pytest.raises(ValueError):
        Bounds(Dyad(3, 0), Dyad(5, -1))


def test_bounds_text_round_trip():
    b = log_of_int(17)
    assert Bounds.parse(str(b)) == b


def test_bounds_exact_requires_dyadic():
    b = Bounds.exact(Fraction(3, 8))
    assert b.lo_fraction() == b.hi_fraction() == Fraction(3, 8)
    with pytest.raises(ValueError):
        Bounds.exact(Fraction(1, 3))


def test_bounds_rational_comparisons():
    b = log_of_int(2)
    assert b.entirely_gt(Fraction(69, 100))
    assert b.entirely_lt(Fraction(70, 100))
    assert b.contains(Fraction(b.lo_fraction() + b.hi_fraction(), 2))
    assert not b.entirely_ge(1)


def test_astronomical_endpoints_compare_without_expansion():
    # endpoints of shape man*2^(huge) must order exactly; expanding them
    # to integers would allocate ~2^70 bits
    big = Bounds(Dyad(3, 1 << 70), Dyad(5, 1 << 70))
    assert big.lo.as_mpf() < big.hi.as_mpf()
    assert big.lo.log2_magnitude() == 2 + (1 << 70)


# ---------------------------------------------------------------------------
# Enclosures
# ---------------------------------------------------------------------------


@given(st.integers(2, 10 ** 9))
@settings(max_examples=60)
def test_log_of_int_encloses_reference(n):
    b = log_of_int(n)
    with mpmath.workprec(200):
        ref = mpmath.log(n)
        assert b.lo.as_mpf() <= ref <= b.hi.as_mpf()
    assert b.width_fraction() < Fraction(1, 10 ** 20)


@pytest.mark.parametrize("m", [0, 1, 2, 23, 511, 4096, 4097, 10 ** 6])
def test_log_factorial_encloses_reference(m):
    b = log_factorial(m)
    with mpmath.workprec(200):
        ref = mpmath.loggamma(m + 1)
        assert b.lo.as_mpf() <= ref <= b.hi.as_mpf()
    if m:
        assert b.width_fraction() / max(1, m) < Fraction(1, 10 ** 12)


def test_log_factorial_matches_exact_below_stirling_cut():
    assert log_factorial(23) == log_of_int(math.factorial(23))


@given(st.fractions(min_value=Fraction(-10), max_value=Fraction(10)))
@settings(max_examples=60)
def test_iv_fraction_contains_rational(q):
    assert snapshot(lambda: iv_fraction(q)).contains(q)


# ---------------------------------------------------------------------------
# Decision ladder
# ---------------------------------------------------------------------------


def test_decide_returns_first_settled_value():
    calls = []

    def attempt(prec):
        calls.append(prec)
        return "yes" if prec >= 512 else None

    assert decide(attempt, start=128) == "yes"
    assert calls == [128, 256, 512]


def test_decide_exhausts_at_cap():
    with pytest.raises(PrecisionExhausted):
        decide(lambda prec: None, start=64, cap=256, what="a stuck comparison")


def test_snapshot_result_is_frozen():
    a = snapshot(lambda: iv_fraction(Fraction(1, 3)), prec=64)
    b = snapshot(lambda: iv_fraction(Fraction(1, 3)), prec=64)
    assert a == b
    assert a.width_fraction() > 0  # 1/3 is not dyadic


def test_working_precision_env_override(monkeypatch):
    monkeypatch.setenv("TOEPLITZ_FORGE_PRECISION", "192")
    assert working_precision() == 192
    monkeypatch.setenv("TOEPLITZ_FORGE_PRECISION", "8")
    with pytest.raises(ValueError):
        working_precision()
    monkeypatch.delenv("TOEPLITZ_FORGE_PRECISION")
    assert working_precision() == 128


# ---------------------------------------------------------------------------
# Derived integer searches
# ---------------------------------------------------------------------------


def test_least_multiple_exceeding_small_cases():
    # e^5 = 148.41...; the next multiple of 3 is 150
    assert least_multiple_exceeding(3, Fraction(5)) == 150
    assert least_multiple_exceeding(7, Fraction(0)) == 7
    got = least_multiple_exceeding(64, Fraction(12))
    assert got % 64 == 0
    assert math.log(got) >= 12 > math.log(got - 64)


def test_least_multiple_exceeding_respects_digit_budget():
    with pytest.raises(DigitBudgetExceeded):
        least_multiple_exceeding(2, Fraction(10 ** 6), digit_budget=1000)


def test_magnitude_views():
    m = Magnitude.from_int(1000)
    assert m.is_exact and m.digits10_upper() == 4
    assert Fraction(69077, 10000) < m.log_lower() <= m.log_upper() < Fraction(69078, 10000)
    with pytest.raises(ValueError):
        Magnitude.from_int(-3)
