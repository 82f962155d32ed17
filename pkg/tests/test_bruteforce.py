"""Exhaustive reconstructions pinned against the lazy evaluation path."""

from __future__ import annotations

from fractions import Fraction

import pytest

from toeplitz_forge.blocks import SymbolBlock, materialize
from toeplitz_forge.bruteforce import (
    HOLE,
    PartialBlock,
    limit_grid,
    occurrence_fraction,
    pasted_block,
    pasted_blocks,
    y_grid,
    y_sequence,
)
from toeplitz_forge.errors import CellBudgetExceeded, DepthBudgetExceeded
from toeplitz_forge.lattice import FundamentalDomain


def _window(toy):
    if toy.dimension == 1:
        return FundamentalDomain((-60,), (120,))
    return FundamentalDomain((-6, -4), (12, 10))


# ---------------------------------------------------------------------------
# Pasted grids
# ---------------------------------------------------------------------------


def test_pasting_agrees_with_pointwise_evaluation(toys):
    for toy in toys:
        sys = toy.blocks
        for level in (0, 1, 2):
            grids = pasted_blocks(sys, level)
            assert len(grids) == sys.block_count(level)
            for j, grid in enumerate(grids, start=1):
                assert grid == materialize(sys, level, j)
        # the deepest count is open-ended, but the privileged block
        # still pastes from the full level-2 table
        top = toy.family.levels
        assert pasted_block(sys, top, 1) == materialize(sys, top, 1)


def test_pasted_blocks_are_pairwise_distinct(toys):
    for toy in toys:
        for level in (1, 2):
            grids = pasted_blocks(toy.blocks, level)
            assert len({g.letters for g in grids}) == len(grids)


def test_pasting_guards(toy_a):
    sys = toy_a.blocks
    with pytest.raises(ValueError):
        pasted_blocks(sys, 3)  # no exact level-3 count
    with pytest.raises(CellBudgetExceeded):
        pasted_blocks(sys, 2, cell_budget=24)
    with pytest.raises(CellBudgetExceeded):
        pasted_block(sys, 3, 1, cell_budget=100)
    assert pasted_block(sys, 0, 3).letters == (2,)
    with pytest.raises(ValueError):
        pasted_block(sys, 0, 5)


# ---------------------------------------------------------------------------
# Hole-filling approximants
# ---------------------------------------------------------------------------


def test_first_approximant_is_all_holes(toy_a):
    window = FundamentalDomain((0,), (12,))
    assert y_grid(toy_a.blocks, 0, window).letters == (HOLE,) * 12
    assert y_grid(toy_a.blocks, 0, window).holes == tuple(
        window.iter_points()
    )


def test_approximants_fill_exactly_the_stabilized_cells(toys):
    for toy in toys:
        window = _window(toy)
        for n, grid in enumerate(y_sequence(toy.blocks, window), start=1):
            for g in window.iter_points():
                if toy.is_periodic_at(g, n):
                    assert grid.letter_at(g) == toy.eval(g)
                else:
                    assert grid.letter_at(g) is HOLE


def test_approximants_only_ever_fill_holes(toys):
    for toy in toys:
        window = _window(toy)
        seq = y_sequence(toy.blocks, window)
        for prev, cur in zip(seq, seq[1:]):
            for a, b in zip(prev.letters, cur.letters):
                if a is not HOLE:
                    assert b == a


def test_limit_grid_matches_eval_and_its_refusals(toys):
    for toy in toys:
        window = _window(toy)
        grid = limit_grid(toy.blocks, window)
        for g in window.iter_points():
            try:
                want = toy.eval(g)
            except DepthBudgetExceeded:
                want = HOLE
            assert grid.letter_at(g) == want


def test_limit_grid_of_the_shifted_toy_has_interior_holes(toy_a):
    # the deepest box [-52, 188) covers the window, so no holes inside
    inside = limit_grid(toy_a.blocks, FundamentalDomain((-52, ), (240,)))
    assert inside.holes == ()
    # beyond it, undetermined cells stay open
    outside = limit_grid(toy_a.blocks, FundamentalDomain((-60,), (8,)))
    assert (-53,) in outside.holes


def test_partial_block_validation():
    with pytest.raises(ValueError):
        PartialBlock(FundamentalDomain((0,), (3,)), (1, 2))
    block = PartialBlock(FundamentalDomain((0,), (3,)), (1, HOLE, 0))
    assert block.holes == ((1,),)
    assert block.letter_at((2,)) == 0


def test_y_grid_guards(toy_a):
    with pytest.raises(ValueError):
        y_grid(toy_a.blocks, 4, FundamentalDomain((0,), (4,)))
    with pytest.raises(CellBudgetExceeded):
        y_grid(toy_a.blocks, 1, FundamentalDomain((0,), (50,)), cell_budget=10)


# ---------------------------------------------------------------------------
# Occurrence counting
# ---------------------------------------------------------------------------


def test_every_block_occurs_equally_often_one_level_up(toys):
    """Each level-(n-1) grid occupies exactly one position of every
    level-n block: the uniform frequencies behind unique ergodicity."""
    for toy in toys:
        sys = toy.blocks
        fam = toy.family
        for n in (1, 2):
            count = sys.block_count(n)
            lower = pasted_blocks(sys, n - 1)
            total = fam.coset_box(n).count()
            for j in (1, 2, count):
                big = pasted_block(sys, n, j)
                for small in lower:
                    frac = occurrence_fraction(fam, big, n, small, n - 1)
                    assert frac == Fraction(1, total)


def test_occurrence_fraction_values(toy_a):
    sys = toy_a.blocks
    fam = toy_a.family
    big = pasted_block(sys, 2, 4)
    small = pasted_blocks(sys, 1)[0]
    assert occurrence_fraction(fam, big, 2, small, 1) == Fraction(1, 6)
    never = SymbolBlock(fam.domain(1), (9, 9, 9, 9))
    assert occurrence_fraction(fam, big, 2, never, 1) == 0
    # letter frequencies (level-0 windows) sum to one
    letters = [
        occurrence_fraction(
            fam, big, 2, SymbolBlock(fam.domain(0), (a,)), 0
        )
        for a in range(4)
    ]
    assert sum(letters) == 1


def test_occurrence_fraction_domain_checks(toy_a):
    sys = toy_a.blocks
    fam = toy_a.family
    big = pasted_block(sys, 2, 1)
    small = pasted_block(sys, 1, 1)
    with pytest.raises(ValueError):
        occurrence_fraction(fam, big, 3, small, 1)
    with pytest.raises(ValueError):
        occurrence_fraction(fam, big, 2, small, 0)
