"""Window census, exact frequencies, and entropy estimates.

Counting paths are exact rational arithmetic throughout — the headline
identities (every block at frequency ``1/q_t``, spread exactly zero) are
equalities, not approximations, and must not suffer rounding.  Entropy
estimates are certified interval enclosures read off a verified plan.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .blocks import SymbolBlock, materialize
from .errors import CellBudgetExceeded, VerificationFailure
from .lattice import DomainFamily, FundamentalDomain, Vec, interior_box, vadd
from .rigor import Bounds, iv_fraction, iv_log_int, snapshot
from .toeplitz import ArrayLike, ToeplitzArray

__all__ = [
    "census",
    "census_certificate",
    "ap",
    "FrequencyReport",
    "unique_ergodicity_probe",
    "LevelEstimate",
    "entropy_estimates",
    "birkhoff",
    "psi_quantity",
    "census_records",
    "frequency_records",
    "CENSUS_SCHEMA",
    "FREQUENCY_SCHEMA",
]


def census(
    handle: ArrayLike,
    t: int,
    scan_level: Optional[int] = None,
    cell_budget: Optional[int] = 10 ** 6,
) -> tuple:
    """Distinct level-t windows of the array, in first-occurrence order.

    Sweeps the level-t lattice positions of a deeper box and collects
    the window contents.  One refinement above ``t`` already shows every
    block (each next-level block pastes all of them), so that is the
    default scan box; pass a larger ``scan_level`` for a widening sweep.
    """
    fam = handle.family
    if not 0 <= t <= fam.levels:
        raise ValueError(f"level {t} outside [0, {fam.levels}]")
    if scan_level is None:
        scan_level = min(t + 1, fam.levels)
    if not t <= scan_level <= fam.levels:
        raise ValueError(
            f"scan level {scan_level} outside [{t}, {fam.levels}]"
        )
    positions = fam.lattice_box(scan_level, t)
    dom = fam.domain(t)
    touched = positions.count() * dom.cell_count()
    if cell_budget is not None and touched > cell_budget:
        raise CellBudgetExceeded(
            f"census sweep touches {touched} cells, budget {cell_budget}"
        )
    seen: dict = {}
    for gamma in positions.iter_points():
        letters = tuple(
            handle.eval(vadd(gamma, h)) for h in dom.iter_points()
        )
        if letters not in seen:
            seen[letters] = SymbolBlock(dom, letters)
    return tuple(seen.values())


def census_certificate(handle: ArrayLike, t: int) -> int:
    """Exact window count at level ``t``, when the construction knows it.

    The constructed array's level-t windows are exactly its level-t
    blocks, so the count is the block count — available without any
    sweep whenever the plan pinned it down exactly.
    """
    count = handle.block_count(t)
    if count is None:
        raise ValueError(
            f"level-{t} block count survives only as an enclosure; "
            "use a scan"
        )
    return count


def ap(family: DomainFamily, b: SymbolBlock, c: SymbolBlock) -> Fraction:
    """Frequency of ``b`` at aligned lattice positions inside ``c``.

    Both grids must sit on level boxes of the family; the positions are
    the trace of ``c``'s box on ``b``'s lattice.  Exact.
    """
    t = _level_of(family, b.domain)
    s = _level_of(family, c.domain)
    if t > s:
        raise ValueError(f"pattern level {t} exceeds window level {s}")
    positions = family.lattice_box(s, t)
    hits = 0
    for gamma in positions.iter_points():
        if all(
            c.letter_at(vadd(gamma, h)) == b.letter_at(h)
            for h in b.domain.iter_points()
        ):
            hits += 1
    return Fraction(hits, positions.count())


def _level_of(family: DomainFamily, dom: FundamentalDomain) -> int:
    for n in range(family.levels + 1):
        if family.domain(n) == dom:
            return n
    raise ValueError(f"box {dom} is not one of the family's level boxes")


@dataclass(frozen=True)
class FrequencyReport:
    """Frequency table of level-t blocks across sampled level-s blocks.

    ``table[i][j]`` is the frequency of ``blocks[i]`` inside the block
    with index ``indices[j]``.  A strictly ergodic construction makes
    every row constant; ``spread`` is the worst row variation and the
    probe passes exactly when it is zero.
    """

    t: int
    s: int
    blocks: tuple
    indices: tuple
    table: tuple

    @property
    def spread(self) -> Fraction:
        worst = Fraction(0)
        for row in self.table:
            worst = max(worst, max(row) - min(row))
        return worst

    @property
    def uniform(self) -> bool:
        return self.spread == 0

    def witness(self) -> Optional[tuple]:
        """A (block, low index, high index) triple realizing the spread."""
        spread = self.spread
        if spread == 0:
            return None
        for bi, row in enumerate(self.table):
            if max(row) - min(row) == spread:
                return (
                    self.blocks[bi],
                    self.indices[row.index(min(row))],
                    self.indices[row.index(max(row))],
                )
        return None


def unique_ergodicity_probe(
    handle: ToeplitzArray,
    t: int,
    sample: int = 50,
    seed: int = 0,
    cell_budget: Optional[int] = 10 ** 6,
) -> FrequencyReport:
    """Frequencies of all level-t blocks across sampled level-(t+1) blocks.

    Samples deterministically (all indices when there are at most
    ``sample`` of them, otherwise a seeded draw without replacement) and
    evaluates the full exact frequency table.
    """
    system = getattr(handle, "blocks", None)
    if system is None:
        raise TypeError(
            "the probe samples blocks by index and needs a constructed "
            "array handle"
        )
    s = t + 1
    count = system.block_count(s)
    if count is None:
        raise ValueError(
            f"level-{s} block count survives only as an enclosure; "
            "cannot fix an index range to sample"
        )
    if count <= sample:
        indices = tuple(range(1, count + 1))
    else:
        rng = random.Random(seed)
        indices = tuple(sorted(rng.sample(range(1, count + 1), sample)))
    blocks_t = census(handle, t, cell_budget=cell_budget)
    cs = [materialize(system, s, j, cell_budget) for j in indices]
    table = tuple(
        tuple(ap(handle.family, b, c) for c in cs) for b in blocks_t
    )
    return FrequencyReport(t=t, s=s, blocks=blocks_t, indices=indices, table=table)


@dataclass(frozen=True)
class LevelEstimate:
    """Entropy estimate at one level, with its guaranteed bracket.

    ``estimate`` encloses ``log(block count) / box size``; ``bracket``
    (growth levels only) encloses the interval the plan certifies the
    estimate to lie in; ``certified`` records the containment.
    """

    level: int
    estimate: Bounds
    bracket: Optional[tuple]
    certified: bool


def entropy_estimates(
    plan,
    levels: Optional[Sequence[int]] = None,
    cells: int = 1,
    prec: Optional[int] = None,
) -> tuple:
    """Per-level entropy estimates of a planned construction.

    The level-n estimate is ``log(q_n) / p_n`` (divided by ``cells``
    when the array is read through a substitution on that many cells).
    Growth levels carry the planned bracket
    ``[h + 3/p_n, h + (d log(M+l) + 3)/p_n]`` scaled the same way, and
    the containment of the estimate's enclosure in the bracket's outer
    hull is checked.  Levels are limited to those whose box size is
    exact; beyond that the quotient is not representable.
    """
    if cells < 1:
        raise ValueError("cells must be positive")
    if levels is None:
        levels = [
            n for n in range(1, plan.depth + 1) if plan.p[n].is_exact
        ]
    out = []
    for n in levels:
        if not 1 <= n <= plan.depth:
            raise ValueError(f"level {n} outside [1, {plan.depth}]")
        if not plan.p[n].is_exact:
            raise ValueError(
                f"level-{n} box size survives only as an enclosure"
            )
        p_n = plan.p[n].value * cells
        q_n = plan.q[n]
        estimate = snapshot(
            lambda: q_n.log_bounds.to_iv() / p_n, prec
        )
        bracket = None
        certified = True
        if n >= plan.N:
            m_l = plan.M + n - plan.N
            lo = snapshot(
                lambda: iv_fraction(plan.h + Fraction(3, plan.p[n].value))
                / cells,
                prec,
            )
            hi = snapshot(
                lambda: (
                    iv_fraction(plan.h)
                    + (plan.d * iv_log_int(m_l) + 3) / plan.p[n].value
                )
                / cells,
                prec,
            )
            bracket = (lo, hi)
            certified = (
                estimate.lo.as_mpf() >= lo.lo.as_mpf()
                and estimate.hi.as_mpf() <= hi.hi.as_mpf()
            )
            if not certified:
                raise VerificationFailure(
                    f"level-{n} estimate {estimate} escapes its bracket "
                    f"[{lo}, {hi}]"
                )
        out.append(
            LevelEstimate(
                level=n, estimate=estimate, bracket=bracket,
                certified=certified,
            )
        )
    return tuple(out)


def birkhoff(
    handle: ArrayLike,
    pattern: SymbolBlock,
    g: Vec,
    n: int,
    cell_budget: Optional[int] = 10 ** 6,
) -> Fraction:
    """Frequency of a pattern over the level-n box shifted to ``g``.

    Counts the cells ``h`` of the shifted box at which the pattern reads
    off the array (``x(h + m)`` matching every cell ``m``).  Exact; the
    box must stay within evaluable depth.
    """
    g = tuple(g)
    fam = handle.family
    dom = fam.domain(n)
    window = FundamentalDomain(vadd(dom.lower, g), dom.sides)
    touched = window.cell_count() * pattern.domain.cell_count()
    if cell_budget is not None and touched > cell_budget:
        raise CellBudgetExceeded(
            f"frequency scan touches {touched} cells, budget {cell_budget}"
        )
    hits = 0
    for h in window.iter_points():
        if all(
            handle.eval(vadd(h, m)) == pattern.letter_at(m)
            for m in pattern.domain.iter_points()
        ):
            hits += 1
    return Fraction(hits, window.cell_count())


def psi_quantity(
    handle: ArrayLike,
    t: int,
    n: int,
    b: SymbolBlock,
    g: Vec,
    cell_budget: Optional[int] = 10 ** 6,
) -> Fraction:
    """Fraction of interior level-t positions of a shifted box showing ``b``.

    Positions are the level-t lattice translates whose window fits
    entirely inside the level-n box shifted to ``g``; each is compared
    cell by cell.  Exact.
    """
    g = tuple(g)
    fam = handle.family
    inner = fam.domain(t)
    grid = interior_box(inner, fam.scale.p_diag(t), fam.domain(n), g)
    if grid.count() == 0:
        raise ValueError("no aligned position fits inside the window")
    touched = grid.count() * inner.cell_count()
    if cell_budget is not None and touched > cell_budget:
        raise CellBudgetExceeded(
            f"position sweep touches {touched} cells, budget {cell_budget}"
        )
    hits = 0
    for gamma in grid.iter_points():
        if all(
            handle.eval(vadd(gamma, h)) == b.letter_at(h)
            for h in inner.iter_points()
        ):
            hits += 1
    return Fraction(hits, grid.count())


# ---------------------------------------------------------------------------
# Record export
# ---------------------------------------------------------------------------

CENSUS_SCHEMA = "toeplitz-forge-census v1"
FREQUENCY_SCHEMA = "toeplitz-forge-frequencies v1"


def census_records(blocks: Sequence[SymbolBlock]) -> str:
    """Line-delimited census export.

    Header line with the schema version, then one record per block:
    ``block <index> <origin> <sides> <letters...>`` with comma-joined
    coordinates and space-separated letters.
    """
    lines = [CENSUS_SCHEMA]
    for i, blk in enumerate(blocks):
        origin = ",".join(str(x) for x in blk.domain.lower)
        sides = ",".join(str(x) for x in blk.domain.sides)
        letters = " ".join(str(a) for a in blk.letters)
        lines.append(f"block {i} {origin} {sides} {letters}")
    return "\n".join(lines) + "\n"


def frequency_records(report: FrequencyReport) -> str:
    """Line-delimited frequency export; rationals printed as ``p/q``."""
    lines = [FREQUENCY_SCHEMA, f"levels {report.t} {report.s}"]
    for bi, row in enumerate(report.table):
        for j, val in zip(report.indices, row):
            lines.append(f"ap {bi} {j} {val.numerator}/{val.denominator}")
    spread = report.spread
    lines.append(f"spread {spread.numerator}/{spread.denominator}")
    return "\n".join(lines) + "\n"
