"""Indexed permutation families and pointwise block evaluation."""

from __future__ import annotations

from itertools import permutations
from math import factorial

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplitz_forge.blocks import (
    BlockSystem,
    ExplicitFamily,
    FullSymmetricFamily,
    HybridFamily,
    SymbolBlock,
    block_eval,
    constrained_min_rank,
    lehmer_rank,
    lehmer_unrank,
    lehmer_value_at,
    materialize,
)
from toeplitz_forge.errors import CellBudgetExceeded
from toeplitz_forge.lattice import FundamentalDomain
from toeplitz_forge.theta import theta_component


# ---------------------------------------------------------------------------
# Lehmer codes
# ---------------------------------------------------------------------------


def test_lehmer_rank_is_lexicographic():
    perms = sorted(permutations(range(4)))
    assert [lehmer_rank(p) for p in perms] == list(range(24))


def test_lehmer_endpoints():
    assert lehmer_rank((0, 1, 2, 3, 4, 5)) == 0
    assert lehmer_rank((5, 4, 3, 2, 1, 0)) == factorial(6) - 1
    assert lehmer_unrank(0, 6) == (0, 1, 2, 3, 4, 5)


@given(st.integers(1, 7).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, factorial(n) - 1))))
def test_lehmer_unrank_rank_round_trip(nr):
    n, r = nr
    assert lehmer_rank(lehmer_unrank(r, n)) == r


@given(st.permutations(tuple(range(6))))
def test_lehmer_rank_unrank_round_trip(perm):
    assert lehmer_unrank(lehmer_rank(perm), 6) == tuple(perm)


def test_lehmer_rejections():
    with pytest.raises(ValueError):
        lehmer_rank((0, 0, 1))
    with pytest.raises(ValueError):
        lehmer_unrank(6, 3)
    with pytest.raises(ValueError):
        lehmer_unrank(-1, 3)


def test_lehmer_value_at_matches_unrank():
    for rank in (0, 1, 17, 5039):
        perm = lehmer_unrank(rank, 7)
        assert [lehmer_value_at(rank, 7, i) for i in range(7)] == list(perm)


def test_lehmer_value_at_huge_domain():
    # rank 3 permutes only the last three values: suffix (1, 2, 0)
    n = 10 ** 6
    assert lehmer_value_at(3, n, 0) == 0
    assert lehmer_value_at(3, n, n - 4) == n - 4
    assert lehmer_value_at(3, n, n - 3) == n - 2
    assert lehmer_value_at(3, n, n - 2) == n - 1
    assert lehmer_value_at(3, n, n - 1) == n - 3


def test_constrained_min_rank_against_scan():
    for n in range(1, 6):
        perms = sorted(permutations(range(n)))
        for pos in range(n):
            for val in range(n):
                want = next(
                    (r for r, p in enumerate(perms) if r >= 1 and p[pos] == val),
                    None,
                )
                assert constrained_min_rank(n, pos, val) == want


# ---------------------------------------------------------------------------
# Permutation families
# ---------------------------------------------------------------------------


def test_full_symmetric_first_member_is_order_preserving():
    fam = FullSymmetricFamily(1, 5)
    assert [fam.target(1, r) for r in range(1, 6)] == [2, 3, 4, 5, 6]
    assert fam.base_preimage(4) == 3
    assert fam.base_preimage(1) is None


def test_full_symmetric_enumerates_all_permutations():
    fam = FullSymmetricFamily(1, 4)
    assert fam.member_count() == 24
    seen = {
        tuple(fam.target(j, r) for r in range(1, 5)) for j in range(1, 25)
    }
    assert seen == {tuple(v + 2 for v in p) for p in permutations(range(4))}
    assert fam.index_valid(24)
    assert not fam.index_valid(25)


def test_full_symmetric_solve_against_scan():
    fam = FullSymmetricFamily(1, 4)
    for r in range(1, 5):
        for t in range(2, 6):
            for lo in (1, 2, 5):
                want = next(
                    (j for j in range(lo, 25) if fam.target(j, r) == t), None
                )
                assert fam.solve(r, t, min_index=lo) == want
                got = fam.solve_all(r, t, min_index=lo, limit=3)
                assert len(got) <= 3
                assert all(fam.target(j, r) == t and j >= lo for j in got)
                if want is not None:
                    assert got and got[0] == want


def test_full_symmetric_sparse_lookups():
    m = 50_000
    fam = FullSymmetricFamily(1, m)
    assert fam.target(1, 123) == 124
    # index 2 swaps the two largest values
    assert fam.target(2, m - 1) == m + 1
    assert fam.target(2, m) == m
    assert fam.member_count() is None


def test_full_symmetric_coverage():
    small = FullSymmetricFamily(1, 3).coverage()
    assert small.ok and small.exhaustive and small.kind == "full-symmetric"
    assert FullSymmetricFamily(1, 3).coverage(min_index=2).ok
    big = FullSymmetricFamily(1, 40).coverage(min_index=2)
    assert big.ok and not big.exhaustive


def test_hybrid_cyclic_members():
    fam = HybridFamily(2, 5, size=10)
    for j in range(1, 6):
        for r in range(1, 6):
            assert fam.target(j, r) == 2 + ((r - 1 + j - 1) % 5)
    assert fam.base_preimage(6) == 5


def test_hybrid_tail_members_pin_the_first_point():
    fam = HybridFamily(2, 5, size=10)
    for j in range(6, 11):
        assert fam.target(j, 1) == 2
        reduced = lehmer_unrank(j - 5, 4)
        assert [fam.target(j, r) for r in range(2, 6)] == [
            v + 3 for v in reduced
        ]


def test_hybrid_size_capacity():
    HybridFamily(1, 3, size=4)  # m + (m-1)! - 1
    with pytest.raises(ValueError):
        HybridFamily(1, 3, size=5)
    with pytest.raises(ValueError):
        HybridFamily(1, 1)
    with pytest.raises(ValueError):
        HybridFamily(1, 3, size=0)
    assert HybridFamily(1, 3).index_valid(4)
    assert not HybridFamily(1, 3).index_valid(5)


def test_hybrid_solve_against_scan():
    fam = HybridFamily(2, 4, size=9)
    for r in range(1, 5):
        for t in range(2, 6):
            for lo in (1, 2, 4, 5, 6):
                want = next(
                    (j for j in range(lo, 10) if fam.target(j, r) == t), None
                )
                assert fam.solve(r, t, min_index=lo) == want
                got = fam.solve_all(r, t, min_index=lo)
                assert all(fam.target(j, r) == t and j >= lo for j in got)
                if want is not None:
                    assert got and got[0] == want


def test_hybrid_coverage_needs_tail_depth():
    # ten members reach every pair even without the zero shift; nine
    # leave the identity pin at the third reduced position unrealized
    assert HybridFamily(2, 5, size=10).coverage(min_index=2).ok
    assert not HybridFamily(2, 5, size=9).coverage(min_index=2).ok
    assert HybridFamily(2, 5, size=9).coverage(min_index=1).ok
    structural = HybridFamily(2, 40, size=45).coverage(min_index=2)
    assert structural.ok and not structural.exhaustive
    assert not HybridFamily(2, 40, size=44).coverage(min_index=2).ok
    assert not HybridFamily(2, 3, size=4).coverage(min_index=2).ok


def test_explicit_family():
    fam = ExplicitFamily(1, ((2, 3, 4), (3, 4, 2), (2, 4, 3)))
    assert fam.m == 3
    assert fam.member_count() == 3
    assert fam.target(2, 1) == 3
    assert fam.solve(2, 4, min_index=1) == 2
    assert fam.solve(2, 4, min_index=3) == 3
    assert fam.solve(1, 4) is None
    assert fam.solve_all(3, 4, min_index=1) == (1,)
    assert not fam.coverage().ok
    with pytest.raises(ValueError):
        ExplicitFamily(1, ((2, 3), (3, 3)))
    with pytest.raises(ValueError):
        ExplicitFamily(1, ())


def test_family_argument_checks():
    fam = FullSymmetricFamily(1, 3)
    with pytest.raises(ValueError):
        fam.target(0, 1)
    with pytest.raises(ValueError):
        fam.target(7, 1)
    with pytest.raises(ValueError):
        fam.target(1, 4)
    with pytest.raises(ValueError):
        fam.solve(1, 1)
    with pytest.raises(ValueError):
        fam.solve(1, 6)


# ---------------------------------------------------------------------------
# Symbol blocks
# ---------------------------------------------------------------------------


def test_symbol_block_lookup_and_translate():
    block = SymbolBlock(FundamentalDomain((-1,), (4,)), (5, 6, 7, 8))
    assert block.letter_at((-1,)) == 5
    assert block.letter_at((2,)) == 8
    moved = block.translate((3,))
    assert moved.domain.lower == (2,)
    assert moved.letter_at((2,)) == 5
    with pytest.raises(ValueError):
        SymbolBlock(FundamentalDomain((0,), (4,)), (1, 2, 3))


# ---------------------------------------------------------------------------
# Block systems and evaluation
# ---------------------------------------------------------------------------


def test_block_system_validation(toy_a):
    sys = toy_a.blocks
    assert sys.alphabet == 4
    assert [sys.block_count(n) for n in range(4)] == [4, 6, 10, None]
    with pytest.raises(ValueError):
        BlockSystem(sys.family, sys.sigmas[:2])
    with pytest.raises(ValueError):
        BlockSystem(sys.family, (sys.sigmas[1],) + sys.sigmas[1:])
    wrong_m = (FullSymmetricFamily(1, 4),) + sys.sigmas[1:]
    with pytest.raises(ValueError):
        BlockSystem(sys.family, wrong_m)


def test_domain_rank_round_trip(toys):
    for toy in toys:
        sys = toy.blocks
        for n in range(1, sys.family.levels + 1):
            box = sys.family.coset_box(n)
            zero = (0,) * sys.family.dimension
            pts = [g for g in box.iter_points() if g != zero]
            ranks = [sys.domain_rank(n, g) for g in pts]
            assert sorted(ranks) == list(range(1, len(pts) + 1))
            for g, r in zip(pts, ranks):
                assert sys.domain_unrank(n, r) == g
            with pytest.raises(ValueError):
                sys.domain_rank(n, zero)


def test_level_zero_blocks_are_letters(toy_a):
    sys = toy_a.blocks
    for j in range(1, 5):
        assert block_eval(sys, 0, j, (0,)) == j - 1
    with pytest.raises(ValueError):
        block_eval(sys, 0, 5, (0,))


def test_block_eval_matches_pasting_recursion(toys):
    """A block is its privileged sub-block at the origin and indexed
    sub-blocks at the non-zero coset points."""
    for toy in toys:
        sys = toy.blocks
        fam = sys.family
        for n in (1, 2):
            for j in (1, 2, sys.block_count(n)):
                for h in fam.domain(n).iter_points():
                    theta = theta_component(fam, h, n)
                    rep = fam.project(h, n - 1)
                    if any(theta):
                        sub = sys.sigma(n).target(j, sys.domain_rank(n, theta))
                    else:
                        sub = 1
                    assert block_eval(sys, n, j, h) == block_eval(
                        sys, n - 1, sub, rep
                    )


def test_block_eval_argument_checks(toy_a):
    sys = toy_a.blocks
    with pytest.raises(ValueError):
        block_eval(sys, 1, 1, (4,))  # outside the level-1 box
    with pytest.raises(ValueError):
        block_eval(sys, 1, 0, (0,))
    with pytest.raises(ValueError):
        block_eval(sys, 1, 7, (0,))  # only six level-1 blocks


def test_materialize_level_one_grids(toy_a, toy_b):
    # order-preserving member: letters follow the lexicographic scan
    assert materialize(toy_a.blocks, 1, 1).letters == (0, 1, 2, 3)
    # second member permutes the non-zero cells by (0, 2, 1)
    assert materialize(toy_a.blocks, 1, 2).letters == (0, 1, 3, 2)
    assert materialize(toy_b.blocks, 1, 1).letters == (0, 1, 2, 3)


def test_materialize_respects_cell_budget(toy_a):
    with pytest.raises(CellBudgetExceeded):
        materialize(toy_a.blocks, 3, 1, cell_budget=100)
    grid = materialize(toy_a.blocks, 2, 3, cell_budget=24)
    assert grid.domain == toy_a.family.domain(2)
    assert all(0 <= a < 4 for a in grid.letters)
