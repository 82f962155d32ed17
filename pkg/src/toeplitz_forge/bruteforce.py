"""Slow, explicit reconstructions of the lazy evaluation path.

Everything here rebuilds objects the production code computes lazily:
full block grids by bottom-up pasting, the hole-filling approximant
sequence, occurrence counting by exhaustive window comparison.  Meant
for small hand-built systems where exhaustive enumeration is cheap; the
tests hold the fast path to these grids cell by cell.  The hole symbol
lives only here — the production path never materializes one.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .blocks import BlockSystem, SymbolBlock
from .errors import CellBudgetExceeded
from .lattice import DomainFamily, FundamentalDomain, Vec, vadd, vsub

__all__ = [
    "HOLE",
    "PartialBlock",
    "pasted_block",
    "pasted_blocks",
    "y_grid",
    "y_sequence",
    "limit_grid",
    "occurrence_fraction",
]

HOLE = None


@dataclass(frozen=True)
class PartialBlock:
    """Letter grid with holes (``None`` marks a not-yet-filled cell)."""

    domain: FundamentalDomain
    letters: tuple

    def __post_init__(self):
        if len(self.letters) != self.domain.cell_count():
            raise ValueError(
                f"{len(self.letters)} letters for a "
                f"{self.domain.cell_count()}-cell box"
            )

    def letter_at(self, g: Vec) -> Optional[int]:
        return self.letters[self.domain.rank(tuple(g))]

    @property
    def holes(self) -> tuple:
        return tuple(
            g
            for g, a in zip(self.domain.iter_points(), self.letters)
            if a is HOLE
        )


def pasted_blocks(
    system: BlockSystem, level: int, cell_budget: Optional[int] = 10 ** 6
) -> tuple:
    """All level blocks as explicit grids, assembled bottom-up.

    Level 0 writes the alphabet on the one-cell box; each further level
    pastes the previous grids over the block position set — the
    privileged first grid at position 0, the indexed bijection naming
    every other position's grid.  Shares nothing with ``block_eval``
    except the bijection tables themselves.
    """
    fam = system.family
    count = system.block_count(level)
    if count is None:
        raise ValueError(f"level-{level} block count is not exactly known")
    dom = fam.domain(level)
    if cell_budget is not None and dom.cell_count() * count > cell_budget:
        raise CellBudgetExceeded(
            f"{count} grids of {dom.cell_count()} cells exceed budget "
            f"{cell_budget}"
        )
    if level == 0:
        return tuple(SymbolBlock(dom, (j,)) for j in range(system.alphabet))
    prev = pasted_blocks(system, level - 1, cell_budget)
    return tuple(
        _paste(system, level, j, prev) for j in range(1, count + 1)
    )


def pasted_block(
    system: BlockSystem,
    level: int,
    index: int,
    cell_budget: Optional[int] = 10 ** 6,
) -> SymbolBlock:
    """One block as an explicit grid, pasted bottom-up.

    Unlike ``pasted_blocks`` this needs no exact count for the level
    itself — only the previous level's full table — so it also reaches
    the privileged first block of a level whose count survives only as
    an enclosure.
    """
    fam = system.family
    dom = fam.domain(level)
    if cell_budget is not None and dom.cell_count() > cell_budget:
        raise CellBudgetExceeded(
            f"grid spans {dom.cell_count()} cells, budget {cell_budget}"
        )
    if level == 0:
        if not 1 <= index <= system.alphabet:
            raise ValueError(f"no level-0 block {index}")
        return SymbolBlock(dom, (index - 1,))
    prev = pasted_blocks(system, level - 1, cell_budget)
    return _paste(system, level, index, prev)


def _paste(system: BlockSystem, level: int, index: int, prev: tuple) -> SymbolBlock:
    fam = system.family
    dom = fam.domain(level)
    sigma = system.sigma(level)
    letters = []
    for g in dom.iter_points():
        d = fam.project(g, level - 1)
        gamma = vsub(g, d)
        if any(gamma):
            jj = sigma.target(index, system.domain_rank(level, gamma))
        else:
            jj = 1
        letters.append(prev[jj - 1].letter_at(d))
    return SymbolBlock(dom, tuple(letters))


def y_grid(
    system: BlockSystem,
    n: int,
    window: FundamentalDomain,
    cell_budget: Optional[int] = 10 ** 6,
) -> PartialBlock:
    """The n-th hole-filling approximant, materialized over a window.

    Follows the defining recursion verbatim: where the level-n component
    of a cell vanishes, the privileged previous-level grid is copied in;
    elsewhere the previous approximant is read at the boxed
    representative.  Cells never filled stay ``HOLE``.
    """
    if not 0 <= n <= system.family.levels:
        raise ValueError(f"level {n} outside [0, {system.family.levels}]")
    if cell_budget is not None and window.cell_count() > cell_budget:
        raise CellBudgetExceeded(
            f"window spans {window.cell_count()} cells, budget {cell_budget}"
        )
    tables = [pasted_blocks(system, t, cell_budget) for t in range(n)]
    letters = tuple(
        _y_value(system, tables, n, g) for g in window.iter_points()
    )
    return PartialBlock(window, letters)


def _y_value(system: BlockSystem, tables: list, n: int, g: Vec) -> Optional[int]:
    if n == 0:
        return HOLE
    fam = system.family
    psi = fam.project(g, n - 1)
    if fam.project(g, n) == psi:
        return tables[n - 1][0].letter_at(psi)
    return _y_value(system, tables, n - 1, psi)


def y_sequence(
    system: BlockSystem,
    window: FundamentalDomain,
    cell_budget: Optional[int] = 10 ** 6,
) -> tuple:
    """Approximants ``y_1 .. y_levels`` over the window, in order."""
    return tuple(
        y_grid(system, n, window, cell_budget)
        for n in range(1, system.family.levels + 1)
    )


def limit_grid(
    system: BlockSystem,
    window: FundamentalDomain,
    cell_budget: Optional[int] = 10 ** 6,
) -> PartialBlock:
    """The truncated tower's limit over a window, holes where undecided.

    A cell is determined either by a vanishing component within the
    built levels, or — by box nesting alone — through the privileged
    deepest grid when the cell sits inside the deepest box.  Cells
    outside that box with no vanishing component would depend on levels
    that were never built and stay ``HOLE``.
    """
    levels = system.family.levels
    deepest = system.family.domain(levels)
    y_last = y_grid(system, levels, window, cell_budget)
    top = pasted_block(system, levels, 1, cell_budget)
    letters = []
    for g, a in zip(window.iter_points(), y_last.letters):
        if a is HOLE and deepest.contains(g):
            a = top.letter_at(g)
        letters.append(a)
    return PartialBlock(window, tuple(letters))


def occurrence_fraction(
    family: DomainFamily,
    big: SymbolBlock,
    n: int,
    small: SymbolBlock,
    t: int,
) -> Fraction:
    """Fraction of level-t positions of the level-n box carrying ``small``.

    Positions are the trace of the level-n box on the level-t lattice;
    the window at each position is compared against ``small`` cell by
    cell.  Exact.
    """
    if big.domain != family.domain(n):
        raise ValueError(f"big grid does not sit on the level-{n} box")
    if small.domain != family.domain(t):
        raise ValueError(f"small grid does not sit on the level-{t} box")
    positions = family.lattice_box(n, t)
    hits = 0
    for gamma in positions.iter_points():
        if all(
            big.letter_at(vadd(gamma, h)) == small.letter_at(h)
            for h in small.domain.iter_points()
        ):
            hits += 1
    return Fraction(hits, positions.count())
