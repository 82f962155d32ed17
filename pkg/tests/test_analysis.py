"""Window census, exact frequencies, and certified entropy estimates."""

from __future__ import annotations

from fractions import Fraction

import pytest

from toeplitz_forge.analysis import (
    CENSUS_SCHEMA,
    FREQUENCY_SCHEMA,
    FrequencyReport,
    ap,
    birkhoff,
    census,
    census_certificate,
    census_records,
    entropy_estimates,
    frequency_records,
    psi_quantity,
    unique_ergodicity_probe,
)
from toeplitz_forge.blocks import SymbolBlock, materialize
from toeplitz_forge.bruteforce import pasted_blocks
from toeplitz_forge.errors import CellBudgetExceeded, VerificationFailure
from toeplitz_forge.lattice import FundamentalDomain
from toeplitz_forge.toeplitz import TranslatedArray


# ---------------------------------------------------------------------------
# Census
# ---------------------------------------------------------------------------


def test_census_windows_are_exactly_the_blocks(toys):
    for toy in toys:
        for t in (1, 2):
            windows = census(toy, t)
            grids = pasted_blocks(toy.blocks, t)
            assert {w.letters for w in windows} == {g.letters for g in grids}
            assert len(windows) == census_certificate(toy, t)


def test_census_at_level_zero_lists_the_letters(toy_a):
    windows = census(toy_a, 0)
    assert tuple(w.letters for w in windows) == ((0,), (1,), (2,), (3,))
    assert census_certificate(toy_a, 0) == 4


def test_census_is_deterministic_and_scan_stable(toy_a):
    base = census(toy_a, 1)
    again = census(toy_a, 1)
    assert [w.letters for w in base] == [w.letters for w in again]
    wider = census(toy_a, 1, scan_level=3)
    assert {w.letters for w in wider} == {w.letters for w in base}


def test_census_guards(toy_a):
    with pytest.raises(ValueError):
        census(toy_a, 4)
    with pytest.raises(ValueError):
        census(toy_a, 2, scan_level=1)
    with pytest.raises(CellBudgetExceeded):
        census(toy_a, 2, cell_budget=10)
    with pytest.raises(ValueError):
        census_certificate(toy_a, 3)  # open-ended deepest count


def test_stock_array_census(k5_array):
    assert census_certificate(k5_array, 1) == 24
    assert len(census(k5_array, 1)) == 24


# ---------------------------------------------------------------------------
# Exact frequencies
# ---------------------------------------------------------------------------


def test_ap_is_uniform_across_blocks(toys):
    for toy in toys:
        fam = toy.family
        sys = toy.blocks
        for t in (0, 1):
            q_t = sys.block_count(t)
            blocks = census(toy, t)
            for j in (1, 2, sys.block_count(t + 1)):
                c = materialize(sys, t + 1, j)
                for b in blocks:
                    assert ap(fam, b, c) == Fraction(1, q_t)


def test_ap_on_itself_and_guards(toy_a):
    fam = toy_a.family
    b = materialize(toy_a.blocks, 1, 3)
    assert ap(fam, b, b) == 1
    c = materialize(toy_a.blocks, 2, 1)
    with pytest.raises(ValueError):
        ap(fam, c, b)  # pattern deeper than window
    stray = SymbolBlock(FundamentalDomain((0,), (3,)), (0, 1, 2))
    with pytest.raises(ValueError):
        ap(fam, stray, c)


# ---------------------------------------------------------------------------
# Unique ergodicity probe
# ---------------------------------------------------------------------------


def test_probe_sees_zero_spread(toys):
    for toy in toys:
        report = unique_ergodicity_probe(toy, 1)
        assert report.indices == tuple(
            range(1, toy.block_count(2) + 1)
        )
        q_1 = toy.block_count(1)
        assert all(
            val == Fraction(1, q_1) for row in report.table for val in row
        )
        assert report.spread == 0
        assert report.uniform
        assert report.witness() is None


def test_probe_sampling_is_deterministic(toy_a):
    one = unique_ergodicity_probe(toy_a, 1, sample=3)
    two = unique_ergodicity_probe(toy_a, 1, sample=3)
    assert one.indices == two.indices and len(one.indices) == 3
    assert one.table == two.table


def test_probe_guards(toy_a):
    with pytest.raises(ValueError):
        unique_ergodicity_probe(toy_a, 2)  # level-3 count is open-ended
    with pytest.raises(TypeError):
        unique_ergodicity_probe(TranslatedArray(toy_a, (1,)), 1)


def test_stock_array_probe(k5_array):
    report = unique_ergodicity_probe(k5_array, 1, sample=4)
    assert len(report.indices) == 4
    assert all(
        val == Fraction(1, 24) for row in report.table for val in row
    )
    assert report.uniform


def test_spread_witness_on_a_skewed_table():
    blocks = ("B0", "B1")
    report = FrequencyReport(
        t=0,
        s=1,
        blocks=blocks,
        indices=(1, 2, 3),
        table=(
            (Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)),
            (Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)),
        ),
    )
    assert report.spread == Fraction(1, 4)
    assert not report.uniform
    assert report.witness() == ("B1", 1, 2)


# ---------------------------------------------------------------------------
# Entropy estimates
# ---------------------------------------------------------------------------


def test_entropy_estimates_cover_the_exact_levels(k5_plan):
    estimates = entropy_estimates(k5_plan)
    assert [e.level for e in estimates] == [1, 2, 3]
    seed, first_growth, deep = estimates
    assert seed.bracket is None
    # log 24 / 5 = 0.6356...
    assert Fraction(63, 100) < seed.estimate.lo_fraction()
    assert seed.estimate.hi_fraction() < Fraction(64, 100)
    # growth levels certify the planned bracket around the target
    h = k5_plan.h
    for est, p_n in ((first_growth, 120), (deep, k5_plan.p[3].value)):
        lo, hi = est.bracket
        assert est.certified
        assert lo.contains(h + Fraction(3, p_n))
        assert est.estimate.lo_fraction() >= lo.lo_fraction()
        assert est.estimate.hi_fraction() <= hi.hi_fraction()
        assert est.estimate.lo_fraction() > h


def test_entropy_estimates_scale_by_the_cell_count(k5_plan):
    plain = entropy_estimates(k5_plan, levels=[2])[0]
    ninth = entropy_estimates(k5_plan, levels=[2], cells=9)[0]
    assert ninth.certified
    assert ninth.estimate.lo_fraction() * 9 <= plain.estimate.hi_fraction()
    assert ninth.estimate.hi_fraction() * 9 >= plain.estimate.lo_fraction()
    assert ninth.bracket[0].contains((k5_plan.h + Fraction(3, 120)) / 9)


def test_pipeline_estimate_lands_on_the_requested_entropy(binary_pipeline):
    res = binary_pipeline
    est = entropy_estimates(res.plan, levels=[2], cells=res.cells)[0]
    assert est.certified
    assert Fraction(1, 10) < est.estimate.lo_fraction()
    assert est.estimate.hi_fraction() < Fraction(1, 10) + Fraction(1, 10 ** 6)


def test_entropy_estimates_guards(k5_plan):
    with pytest.raises(ValueError):
        entropy_estimates(k5_plan, cells=0)
    with pytest.raises(ValueError):
        entropy_estimates(k5_plan, levels=[4])  # symbolic box size
    with pytest.raises(ValueError):
        entropy_estimates(k5_plan, levels=[9])


# ---------------------------------------------------------------------------
# Windowed statistics
# ---------------------------------------------------------------------------


def test_birkhoff_matches_a_patch_recount(toy_a):
    letter0 = SymbolBlock(toy_a.family.domain(0), (0,))
    for g in ((0,), (5,), (-3,)):
        freq = birkhoff(toy_a, letter0, g, 2)
        dom = toy_a.family.domain(2)
        window = FundamentalDomain(
            (dom.lower[0] + g[0],), dom.sides
        )
        grid = toy_a.patch(window)
        assert freq == Fraction(
            sum(1 for a in grid.letters if a == 0), window.cell_count()
        )


def test_birkhoff_budget(toy_a):
    with pytest.raises(CellBudgetExceeded):
        birkhoff(
            toy_a,
            SymbolBlock(toy_a.family.domain(0), (0,)),
            (0,),
            3,
            cell_budget=10,
        )


def test_psi_quantity_matches_ap_on_the_unshifted_window(toy_a):
    fam = toy_a.family
    window = SymbolBlock(
        fam.domain(2), toy_a.patch(fam.domain(2)).letters
    )
    for b in census(toy_a, 1):
        assert psi_quantity(toy_a, 1, 2, b, (0,)) == ap(fam, b, window)


def test_psi_quantity_interior_positions_partition(toy_a):
    for g in ((0,), (3,), (-2,)):
        total = sum(
            psi_quantity(toy_a, 1, 2, b, g) for b in census(toy_a, 1)
        )
        assert total == 1


def test_psi_quantity_guards(toy_a):
    b = materialize(toy_a.blocks, 2, 1)
    with pytest.raises(ValueError):
        psi_quantity(toy_a, 2, 1, b, (0,))  # nothing fits
    small = materialize(toy_a.blocks, 1, 1)
    with pytest.raises(CellBudgetExceeded):
        psi_quantity(toy_a, 1, 3, small, (0,), cell_budget=10)


# ---------------------------------------------------------------------------
# Record export
# ---------------------------------------------------------------------------


def test_census_records_format(toy_a):
    text = census_records(census(toy_a, 0))
    assert text == (
        f"{CENSUS_SCHEMA}\n"
        "block 0 0 1 0\n"
        "block 1 0 1 1\n"
        "block 2 0 1 2\n"
        "block 3 0 1 3\n"
    )


def test_frequency_records_format(toy_a):
    report = unique_ergodicity_probe(toy_a, 1)
    text = frequency_records(report)
    lines = text.splitlines()
    assert lines[0] == FREQUENCY_SCHEMA
    assert lines[1] == "levels 1 2"
    ap_lines = [l for l in lines if l.startswith("ap ")]
    assert len(ap_lines) == 6 * 10
    assert all(l.endswith(" 1/6") for l in ap_lines)
    assert lines[-1] == "spread 0/1"
