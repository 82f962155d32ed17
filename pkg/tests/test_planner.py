"""Parameter planning: seed sequences, entropy bounds, plan assembly."""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction
from math import factorial

import pytest

from toeplitz_forge.errors import (
    DigitBudgetExceeded,
    FormatError,
    InfeasibleEntropy,
)
from toeplitz_forge.planner import (
    assemble_scale,
    choose_M,
    choose_N,
    choose_q,
    divisibility_witness,
    exact_entropy,
    lambda_lower_bound,
    make_plan,
    parse_plan,
    prime_sequences,
    serialize_plan,
    verify_plan,
)
from toeplitz_forge.rigor import Magnitude


# ---------------------------------------------------------------------------
# Seed sequences and entropy bounds
# ---------------------------------------------------------------------------


def test_prime_sequences_for_five_letters():
    seqs = prime_sequences(5, 2)
    assert seqs.pairs == ((1, 5), (5, 24), (120, factorial(23)))


def test_prime_sequence_rates_strictly_decrease():
    seqs = prime_sequences(5, 2)
    for a, b in zip(seqs.rates, seqs.rates[1:]):
        assert b.hi_fraction() < a.lo_fraction()


def test_prime_sequences_rejections():
    with pytest.raises(ValueError):
        prime_sequences(4, 1)
    with pytest.raises(ValueError):
        prime_sequences(5, -1)
    with pytest.raises(DigitBudgetExceeded):
        prime_sequences(5, 3)  # (23! - 1)! leaves any sane digit budget


def test_third_rate_enclosure():
    # log(23!) / 120 = 0.43005...
    rate = prime_sequences(5, 2).rates[2]
    assert Fraction(4299, 10000) < rate.lo_fraction()
    assert rate.hi_fraction() < Fraction(4302, 10000)


def test_lambda_lower_bound_five_letters():
    two = lambda_lower_bound(5, iterations=2)
    assert Fraction(388, 1000) < two.lo_fraction()
    assert two.hi_fraction() < Fraction(389, 1000)
    # one more refinement pushes the floor up: (log((23!-1)!) - 5) / (120 * 23!)
    three = lambda_lower_bound(5, iterations=3)
    assert two.hi_fraction() < three.lo_fraction()
    assert Fraction(4217, 10000) < three.lo_fraction()
    assert three.hi_fraction() < Fraction(4218, 10000)


def test_lambda_lower_bound_wide_alphabet():
    b = lambda_lower_bound(512, iterations=2)
    assert Fraction(52, 10) < b.lo_fraction()
    assert b.hi_fraction() < Fraction(524, 100)


def test_lambda_lower_bound_rejections():
    with pytest.raises(ValueError):
        lambda_lower_bound(1)
    with pytest.raises(ValueError):
        lambda_lower_bound(5, iterations=-1)


def test_choose_M_small_dimensions():
    # least M >= max(4, d+1) with M - (d+1) log M - 1 >= 0
    assert choose_M(1) == 4
    assert choose_M(2) == 7
    assert choose_M(3) == 11
    with pytest.raises(ValueError):
        choose_M(0)


def test_exact_entropy_refuses_floats():
    assert exact_entropy("3/10") == Fraction(3, 10)
    assert exact_entropy(2) == Fraction(2)
    with pytest.raises(TypeError):
        exact_entropy(0.3)


def test_choose_N_for_the_stock_parameters():
    assert choose_N(5, 2, Fraction(3, 10), 7) == 2
    with pytest.raises(InfeasibleEntropy):
        choose_N(5, 2, Fraction(2, 5), 7)


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------


def test_stock_plan_shape(k5_plan):
    plan = k5_plan
    assert (plan.k, plan.d, plan.h) == (5, 2, Fraction(3, 10))
    assert plan.M == 7
    assert plan.N == 2
    assert plan.depth == 4
    assert plan.exact_levels == 3
    assert [q.value for q in plan.q[:3]] == [5, 24, 86593400423993757]
    assert [p.value for p in plan.p[:3]] == [1, 5, 120]
    assert not plan.q[3].is_exact and not plan.q[4].is_exact
    assert [plan.level_kind(n) for n in range(5)] == [
        "alphabet", "seed", "growth", "growth", "growth",
    ]


def test_stock_plan_certificates_all_pass(k5_plan):
    certs = k5_plan.certificates
    assert certs and all(c.passed for c in certs)
    names = {c.name for c in certs}
    assert names == {
        "seed", "cells", "choice", "growth", "arrangements", "bracket",
        "divisibility", "headroom", "capacity", "steering",
    }
    assert all("pass" in str(c) for c in certs)


def test_stock_plan_window(k5_plan):
    lo = k5_plan.window.lo_fraction()
    assert Fraction(388, 1000) < lo < Fraction(389, 1000)


def test_make_plan_rejections():
    with pytest.raises(ValueError):
        make_plan(4, 2, Fraction(3, 10))
    with pytest.raises(ValueError):
        make_plan(5, 0, Fraction(3, 10))
    with pytest.raises(InfeasibleEntropy):
        make_plan(5, 2, Fraction(0))
    with pytest.raises(InfeasibleEntropy) as err:
        make_plan(5, 2, Fraction(2, 5))
    assert "0.388389" in str(err.value)
    with pytest.raises(TypeError):
        make_plan(5, 2, 0.3)


def test_explicit_depth_beyond_certifiable_reach_raises(k5_plan):
    assert k5_plan.depth == 4  # the default stops here on its own
    with pytest.raises(DigitBudgetExceeded):
        make_plan(5, 2, Fraction(3, 10), depth=7)
    with pytest.raises(ValueError):
        make_plan(5, 2, Fraction(3, 10), depth=1)


def test_choose_q_replays_the_stored_counts(k5_plan):
    redo = choose_q(k5_plan, 0)
    assert redo.is_exact and redo.value == k5_plan.q[2].value
    symbolic = choose_q(k5_plan, 2)
    assert not symbolic.is_exact
    assert symbolic.log_bounds == k5_plan.q[4].log_bounds
    with pytest.raises(ValueError):
        choose_q(k5_plan, 3)
    with pytest.raises(ValueError):
        choose_q(k5_plan, -1)


def test_verify_plan_catches_tampering(k5_plan):
    q = list(k5_plan.q)
    q[2] = Magnitude.from_int(q[2].value + 64)  # still divisible by 64
    tampered = replace(k5_plan, q=tuple(q), certificates=())
    bad = [c for c in verify_plan(tampered) if not c.passed]
    assert any(c.name == "choice" and c.level == 2 for c in bad)

    q = list(k5_plan.q)
    q[2] = Magnitude.from_int(q[2].value + 1)
    tampered = replace(k5_plan, q=tuple(q), certificates=())
    bad = {c.name for c in verify_plan(tampered) if not c.passed}
    assert "divisibility" in bad

    p = list(k5_plan.p)
    p[2] = Magnitude.from_int(p[2].value * 2)
    tampered = replace(k5_plan, p=tuple(p), certificates=())
    bad = {c.name for c in verify_plan(tampered) if not c.passed}
    assert "cells" in bad


# ---------------------------------------------------------------------------
# Scale assembly and divisibility
# ---------------------------------------------------------------------------


def test_assemble_scale_rows(k5_plan):
    scale = assemble_scale(k5_plan)
    assert scale.steps == ((5, 1), (24, 1), (12370485774856251, 7))


def test_divisibility_witness(k5_plan):
    # first axis periods: 5, 120, ...; second axis: 1, 1, 7, then the
    # certified growth factors 8, 9 on both axes
    assert divisibility_witness(k5_plan, 5, 1) == 1
    assert divisibility_witness(k5_plan, 2, 1) == 2
    assert divisibility_witness(k5_plan, 3, 1) == 2
    assert divisibility_witness(k5_plan, 7, 2) == 3
    assert divisibility_witness(k5_plan, 8, 2) == 4
    assert divisibility_witness(k5_plan, 9, 2) == 5
    assert divisibility_witness(k5_plan, 11, 2) is None
    with pytest.raises(ValueError):
        divisibility_witness(k5_plan, 0, 1)
    with pytest.raises(ValueError):
        divisibility_witness(k5_plan, 2, 3)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def test_plan_round_trip(k5_plan):
    text = serialize_plan(k5_plan)
    assert text.startswith("toeplitz-forge-plan v1\n")
    parsed = parse_plan(text)
    assert parsed == replace(k5_plan, certificates=())
    assert serialize_plan(parsed) == text
    assert all(c.passed for c in verify_plan(parsed))


def test_parse_plan_rejections(k5_plan):
    text = serialize_plan(k5_plan)
    with pytest.raises(FormatError):
        parse_plan("not a plan\n")
    with pytest.raises(FormatError):
        parse_plan(text.replace("\nd 2\n", "\n"))
    with pytest.raises(FormatError):
        parse_plan(text.replace("q1 exact", "q1 roughly"))
    with pytest.raises(FormatError):
        parse_plan(text.replace(" | least multiple", " least multiple"))
