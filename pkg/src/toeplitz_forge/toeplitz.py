"""Array semantics: pointwise evaluation, periodicity, substitution.

The constructed array is never stored; a handle couples a block system
with the evaluation rule "find the first level whose component of ``g``
vanishes, then read the privileged block of the previous level at the
boxed representative".  Everything else here is derived from that rule:
membership formulas for the periodic structure at each level, refutation
witnesses for non-members, and the letter-to-pattern substitution that
trades alphabet size for entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

from .blocks import (
    BlockSystem,
    FullSymmetricFamily,
    HybridFamily,
    SymbolBlock,
    block_eval,
)
from .errors import (
    CellBudgetExceeded,
    DepthBudgetExceeded,
    InfeasibleEntropy,
    VerificationFailure,
)
from .lattice import (
    DiagonalScale,
    DomainFamily,
    FundamentalDomain,
    Vec,
    shifted_domains,
    vadd,
    vsub,
)
from .theta import essential_witness, min_zero_level, theta_component

__all__ = [
    "ArrayLike",
    "ToeplitzArray",
    "TranslatedArray",
    "SubstitutionMap",
    "SubstitutedArray",
    "canonical_substitution",
    "substitute",
    "periodic_points",
    "PeriodCertificate",
    "EssentialPeriodVerdict",
    "essential_period_check",
    "array_from_plan",
    "PipelineResult",
    "entropy_pipeline",
]


class ArrayLike:
    """Duck-typed contract shared by array handles.

    ``family`` exposes the nested box geometry of the periodic
    structure, ``eval`` the letter at a cell, ``block_count(t)`` the
    number of distinct level-t patterns when exactly known.
    """

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    @property
    def alphabet(self) -> int:
        raise NotImplementedError

    @property
    def family(self) -> DomainFamily:
        raise NotImplementedError

    def eval(self, g: Vec, depth_budget: Optional[int] = None) -> int:
        raise NotImplementedError

    def block_count(self, level: int) -> Optional[int]:
        raise NotImplementedError

    def patch(
        self,
        box: FundamentalDomain,
        depth_budget: Optional[int] = None,
        cell_budget: Optional[int] = 10 ** 7,
    ) -> SymbolBlock:
        """Letters over a box (lexicographic order)."""
        if cell_budget is not None and box.cell_count() > cell_budget:
            raise CellBudgetExceeded(
                f"patch spans {box.cell_count()} cells, budget {cell_budget}"
            )
        return SymbolBlock(
            box,
            tuple(self.eval(g, depth_budget) for g in box.iter_points()),
        )


@dataclass(frozen=True)
class ToeplitzArray(ArrayLike):
    """The constructed array of a block system."""

    blocks: BlockSystem

    @property
    def dimension(self) -> int:
        return self.blocks.family.dimension

    @property
    def alphabet(self) -> int:
        return self.blocks.alphabet

    @property
    def family(self) -> DomainFamily:
        return self.blocks.family

    def block_count(self, level: int) -> Optional[int]:
        return self.blocks.block_count(level)

    def eval(self, g: Vec, depth_budget: Optional[int] = None) -> int:
        m = min_zero_level(self.family, tuple(g), depth_budget)
        rep = self.family.project(tuple(g), m - 1)
        return block_eval(self.blocks, m - 1, 1, rep)

    def patch(
        self,
        box: FundamentalDomain,
        depth_budget: Optional[int] = None,
        cell_budget: Optional[int] = 10 ** 7,
    ) -> SymbolBlock:
        """Letters over a box, sharing block reads within the call.

        Cells with the same stabilization level and boxed representative
        carry the same letter, so each such pair is evaluated once.  The
        cache lives and dies with the call.
        """
        if cell_budget is not None and box.cell_count() > cell_budget:
            raise CellBudgetExceeded(
                f"patch spans {box.cell_count()} cells, budget {cell_budget}"
            )
        reads: dict = {}
        letters = []
        for g in box.iter_points():
            m = min_zero_level(self.family, g, depth_budget)
            key = (m - 1, self.family.project(g, m - 1))
            if key not in reads:
                reads[key] = block_eval(self.blocks, key[0], 1, key[1])
            letters.append(reads[key])
        return SymbolBlock(box, tuple(letters))

    # -- periodic structure -------------------------------------------------

    def periodic_level(self, g: Vec, depth_budget: Optional[int] = None) -> int:
        """First level whose lattice leaves the cell at ``g`` fixed."""
        return min_zero_level(self.family, tuple(g), depth_budget)

    def is_periodic_at(self, g: Vec, n: int) -> bool:
        """Membership in the level-n periodic structure (component formula)."""
        if not 1 <= n <= self.family.levels:
            raise ValueError(f"level {n} outside [1, {self.family.levels}]")
        g = tuple(g)
        return any(
            not any(theta_component(self.family, g, i)) for i in range(1, n + 1)
        )

    def aperiodicity_witness(
        self, g: Vec, n: int, alpha: int, scan_budget: int = 100_000
    ) -> Vec:
        """Level-n lattice vector ``gamma`` with letter ``alpha`` at ``g + gamma``.

        ``alpha`` is any non-zero letter; ``g`` must avoid the level-n
        periodic structure (every non-zero letter occurs along such a
        translate class, which is what makes the class aperiodic).  The
        construction steers the evaluation tower through the level
        ``n + 1`` geometry; when an index chain dead-ends (tiny
        hand-built families), falls back to scanning coset
        representatives.  The returned vector is re-verified by
        evaluation before being handed out.
        """
        g = tuple(g)
        if not 1 <= alpha < self.alphabet:
            raise ValueError(
                f"letter {alpha} outside the non-zero range "
                f"[1, {self.alphabet - 1}]"
            )
        if self.is_periodic_at(g, n):
            raise ValueError(f"{g} lies in the level-{n} periodic structure")
        if n + 1 > self.family.levels:
            raise DepthBudgetExceeded(
                f"witness construction at level {n} needs level {n + 1} "
                "geometry",
                point=g,
                budget=self.family.levels,
            )
        gamma = _steered_translate(self.blocks, g, n, [alpha + 1])
        if gamma is None:
            gamma = _scan_translate(
                self, g, n, lambda letter: letter == alpha, scan_budget
            )
        if gamma is None:
            raise VerificationFailure(
                f"no translate realizing letter {alpha} found for {g} "
                f"at level {n}"
            )
        if self.eval(vadd(g, gamma)) != alpha or not self.family.in_lattice(
            gamma, n
        ):
            raise VerificationFailure(
                f"witness candidate {gamma} for {g} at level {n} failed "
                "re-evaluation"
            )
        return gamma

    def refutation_certificate(
        self, g: Vec, n: int, scan_budget: int = 100_000
    ) -> "PeriodCertificate":
        """Verified letter conflict along ``g``'s level-n translate class."""
        g = tuple(g)
        alpha = self.eval(g)
        for beta in range(1, self.alphabet):
            if beta == alpha:
                continue
            try:
                gamma = self.aperiodicity_witness(g, n, beta, scan_budget)
            except VerificationFailure:
                continue
            return PeriodCertificate(point=g, level=n, translate=gamma,
                                     letter=alpha, other_letter=beta)
        raise VerificationFailure(
            f"no refuting translate found for {g} at level {n}"
        )

    def _essential_pair(self, h: Vec, n: int, scan_budget: int) -> Vec:
        """Member point whose translate by ``h`` leaves the structure."""
        return essential_witness(self.family, range(1, n + 1), h)


@dataclass(frozen=True)
class PeriodCertificate:
    """A verified refutation: the translate changes the letter."""

    point: Vec
    level: int
    translate: Vec
    letter: int
    other_letter: int


def _steered_translate(blocks: BlockSystem, g: Vec, n: int, targets) -> Optional[Vec]:
    """Level-n lattice translate steering the evaluation tower of ``g``.

    The tower's levels ``1..n`` are pinned by the components of ``g``;
    above, coset points are free.  The search walks the chain of index
    equations upward with backtracking (index 1 is never producible by a
    bijection, so every intermediate index must be at least 2) and cuts
    off at the shallowest workable level, where the order-preserving
    member places the assembled block.  Returns ``None`` when every
    target dead-ends within the available levels.
    """
    fam = blocks.family
    g = tuple(g)
    ranks = [
        blocks.domain_rank(i, theta_component(fam, g, i))
        for i in range(1, n + 1)
    ]

    def usable(i: int, j: int) -> bool:
        # a solved index must also name an existing level-i block
        count = blocks.block_count(i)
        return count is None or j <= count

    def search(i: int, t: int, top: int):
        if i == top:
            r_top = blocks.sigma(top).base_preimage(t)
            return None if r_top is None else [(top, r_top)]
        sig = blocks.sigma(i)
        if i <= n:
            for j in sig.solve_all(ranks[i - 1], t, min_index=2):
                if not usable(i, j):
                    continue
                rest = search(i + 1, j, top)
                if rest is not None:
                    return rest
            return None
        # free level: the coset point is ours to choose
        for r in range(1, min(sig.m, 8) + 1):
            for j in sig.solve_all(r, t, min_index=2):
                if not usable(i, j):
                    continue
                rest = search(i + 1, j, top)
                if rest is not None:
                    return [(i, r)] + rest
        return None

    for top in range(n + 1, fam.levels + 1):
        for t0 in targets:
            picks = search(1, t0, top)
            if picks is None:
                continue
            z = fam.project(g, n)
            for level, r in picks:
                z = vadd(z, blocks.domain_unrank(level, r))
            return vsub(z, g)
    return None


def _scan_translate(
    handle: "ArrayLike", g: Vec, n: int, accept, scan_budget: int
) -> Optional[Vec]:
    """Exhaustive fallback: scan the deepest box for a refuting translate."""
    fam = handle.family
    rep = fam.project(tuple(g), n)
    box = fam.lattice_box(fam.levels, n)
    if box.count() > scan_budget:
        raise CellBudgetExceeded(
            f"witness scan needs {box.count()} translates, "
            f"budget {scan_budget}"
        )
    for gamma_star in box.iter_points():
        z = vadd(rep, gamma_star)
        try:
            if accept(handle.eval(z)):
                return vsub(z, tuple(g))
        except DepthBudgetExceeded:
            continue
    return None


@dataclass(frozen=True)
class TranslatedArray(ArrayLike):
    """Handle for ``g0 . y`` with ``(g0 . y)(h) = y(h + g0)``."""

    base: ArrayLike
    shift: Vec

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def alphabet(self) -> int:
        return self.base.alphabet

    @property
    def family(self) -> DomainFamily:
        return self.base.family

    def block_count(self, level: int) -> Optional[int]:
        return self.base.block_count(level)

    def eval(self, g: Vec, depth_budget: Optional[int] = None) -> int:
        return self.base.eval(vadd(tuple(g), self.shift), depth_budget)


def periodic_points(
    handle: ArrayLike,
    n: int,
    box: FundamentalDomain,
    cell_budget: Optional[int] = 10 ** 6,
) -> tuple:
    """Cells of ``box`` inside the level-n periodic structure (formula)."""
    if cell_budget is not None and box.cell_count() > cell_budget:
        raise CellBudgetExceeded(
            f"membership scan over {box.cell_count()} cells, "
            f"budget {cell_budget}"
        )
    return tuple(
        g for g in box.iter_points() if handle.is_periodic_at(g, n)
    )


@dataclass(frozen=True)
class EssentialPeriodVerdict:
    """Outcome of testing a vector against the level-n period lattice.

    A vector inside the lattice is a genuine period and nothing needs
    refuting.  Outside, the verdict carries a verified witness: a cell
    where the array repeats along the lattice, together with the letter
    found there and what happens at the witness shifted by the vector —
    either the shifted cell falls out of the repeating structure
    altogether, or it repeats with a different letter.
    """

    level: int
    vector: Vec
    in_lattice: bool
    witness: Optional[Vec] = None
    witness_letter: Optional[int] = None
    conflict: Optional[Vec] = None
    conflict_member: Optional[bool] = None
    conflict_letter: Optional[int] = None

    @property
    def rejected(self) -> bool:
        """Whether the vector was refuted as a level-n period."""
        return not self.in_lattice


def essential_period_check(
    handle: ArrayLike, n: int, h: Vec, scan_budget: int = 100_000
) -> EssentialPeriodVerdict:
    """Decide whether ``h`` acts as a period of the level-n structure.

    Vectors in the level-n lattice pass trivially.  Any other vector is
    rejected with a verified witness pair: a structure member ``g`` and
    the conflict point ``g + h`` that is either a non-member or a member
    carrying a different letter.  Raises when the witness construction
    cannot be verified by evaluation.
    """
    h = tuple(h)
    fam = handle.family
    if not 1 <= n <= fam.levels:
        raise ValueError(f"level {n} outside [1, {fam.levels}]")
    if fam.in_lattice(h, n):
        return EssentialPeriodVerdict(level=n, vector=h, in_lattice=True)
    g = handle._essential_pair(h, n, scan_budget)
    conflict = vadd(g, h)
    if not handle.is_periodic_at(g, n):
        raise VerificationFailure(
            f"essential-period witness {g} is not a level-{n} member"
        )
    alpha = handle.eval(g)
    member = handle.is_periodic_at(conflict, n)
    beta = handle.eval(conflict)
    if member and beta == alpha:
        raise VerificationFailure(
            f"conflict point {conflict} repeats letter {alpha}; witness "
            f"construction for {h} at level {n} failed"
        )
    return EssentialPeriodVerdict(
        level=n,
        vector=h,
        in_lattice=False,
        witness=g,
        witness_letter=alpha,
        conflict=conflict,
        conflict_member=member,
        conflict_letter=beta,
    )


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubstitutionMap:
    """Letter-to-pattern map on a cubical cell box.

    ``table[b]`` lists the image letters of source letter ``b`` over the
    cell box (lexicographic order).  Valid maps are injective; the
    canonical map additionally pins the image of 0 and makes every
    non-corner cell column surjective, which the periodic-structure
    refutations rely on.
    """

    source_alphabet: int
    target_alphabet: int
    edge: int  # cell box is [0, edge)^d
    dimension: int
    table: tuple

    def __post_init__(self):
        table = tuple(tuple(int(a) for a in row) for row in self.table)
        object.__setattr__(self, "table", table)
        s = self.edge ** self.dimension
        if len(table) != self.source_alphabet:
            raise ValueError("one image per source letter required")
        for b, row in enumerate(table):
            if len(row) != s:
                raise ValueError(f"image of {b} has {len(row)} cells, not {s}")
            if any(not 0 <= a < self.target_alphabet for a in row):
                raise ValueError(f"image of {b} leaves the target alphabet")
        if len(set(table)) != len(table):
            raise ValueError("substitution images must be distinct")

    @property
    def cell_box(self) -> FundamentalDomain:
        return FundamentalDomain(
            (0,) * self.dimension, (self.edge,) * self.dimension
        )

    @property
    def cells(self) -> int:
        return self.edge ** self.dimension

    def image(self, letter: int, f: Vec) -> int:
        return self.table[letter][self.cell_box.rank(tuple(f))]

    def column_surjective(self, f: Vec) -> bool:
        """Whether cell ``f``'s column hits every target letter."""
        col = {row[self.cell_box.rank(tuple(f))] for row in self.table}
        return col == set(range(self.target_alphabet))


def canonical_substitution(k: int, edge: int, dimension: int) -> SubstitutionMap:
    """The pinned base-k digit substitution on ``[0, edge)^dimension``.

    Source letters are written base-k over the cells, most significant
    digit at the first cell of the scan.  The image of 0 is pinned to
    "0 at the corner, 1 elsewhere"; the source letter whose expansion
    that pattern would duplicate takes the all-zero pattern instead, so
    the map stays injective.
    """
    if k < 2:
        raise ValueError("target alphabet needs at least two letters")
    s = edge ** dimension
    source = k ** s

    def digits(value: int) -> tuple:
        out = []
        for _ in range(s):
            value, r = divmod(value, k)
            out.append(r)
        out.reverse()
        return tuple(out)

    pinned = tuple([0] + [1] * (s - 1))
    collider = (k ** (s - 1) - 1) // (k - 1)  # expansion(collider) == pinned
    table = []
    for b in range(source):
        if b == 0:
            table.append(pinned)
        elif b == collider:
            table.append(digits(0))
        else:
            table.append(digits(b))
    return SubstitutionMap(source, k, edge, dimension, tuple(table))


def substitute(handle: "ToeplitzArray", sub: SubstitutionMap) -> "SubstitutedArray":
    """Attach a letter-to-pattern substitution to a constructed array.

    Beyond the map's own well-formedness this demands the two properties
    the substituted refutation machinery rests on: the table must be a
    bijection onto the full set of cell patterns, and the image of 0
    must be pinned (0 at the corner cell, 1 everywhere else).
    """
    if not isinstance(handle, ToeplitzArray):
        raise TypeError("substitution attaches to a constructed array handle")
    if sub.source_alphabet != sub.target_alphabet ** sub.cells:
        raise ValueError(
            f"table with {sub.source_alphabet} rows is not a bijection onto "
            f"the {sub.target_alphabet}^{sub.cells} cell patterns"
        )
    pinned = (0,) + (1,) * (sub.cells - 1)
    if sub.table[0] != pinned:
        raise ValueError("the image of 0 must be 0 at the corner, 1 elsewhere")
    return SubstitutedArray(handle, sub)


@dataclass(frozen=True)
class SubstitutedArray(ArrayLike):
    """Cellwise substitution of a constructed array.

    The value at ``f + P d`` (cell ``f``, source point ``d``, ``P`` the
    diagonal cell period) is the image of the source letter at ``d``
    read at cell ``f``.  The periodic structure geometry scales
    accordingly: the derived family is the source family with the first
    step and the offsets multiplied by the cell edge.
    """

    source: ToeplitzArray
    sub: SubstitutionMap

    def __post_init__(self):
        if self.sub.dimension != self.source.dimension:
            raise ValueError("substitution and source dimensions differ")
        if self.sub.source_alphabet != self.source.alphabet:
            raise ValueError(
                f"substitution expects {self.sub.source_alphabet} source "
                f"letters, array has {self.source.alphabet}"
            )

    @property
    def dimension(self) -> int:
        return self.source.dimension

    @property
    def alphabet(self) -> int:
        return self.sub.target_alphabet

    @cached_property
    def family(self) -> DomainFamily:
        src = self.source.family
        t = self.sub.edge
        steps = (tuple(e * t for e in src.scale.steps[0]),) + src.scale.steps[1:]
        offsets = tuple(
            tuple(x * t for x in off) for off in src.offsets
        )
        return DomainFamily(DiagonalScale(steps), offsets)

    def block_count(self, level: int) -> Optional[int]:
        if level == 0:
            return self.sub.target_alphabet
        return self.source.block_count(level)

    def split(self, g: Vec) -> tuple:
        """Cell coordinate and source point of ``g``."""
        t = self.sub.edge
        f = tuple(x % t for x in g)
        d = tuple((x - r) // t for x, r in zip(g, f))
        return f, d

    def eval(self, g: Vec, depth_budget: Optional[int] = None) -> int:
        f, d = self.split(tuple(g))
        return self.sub.image(self.source.eval(d, depth_budget), f)

    def patch(
        self,
        box: FundamentalDomain,
        depth_budget: Optional[int] = None,
        cell_budget: Optional[int] = 10 ** 7,
    ) -> SymbolBlock:
        """Letters over a box, evaluating each source point once."""
        if cell_budget is not None and box.cell_count() > cell_budget:
            raise CellBudgetExceeded(
                f"patch spans {box.cell_count()} cells, budget {cell_budget}"
            )
        reads: dict = {}
        letters = []
        for g in box.iter_points():
            f, d = self.split(g)
            if d not in reads:
                reads[d] = self.source.eval(d, depth_budget)
            letters.append(self.sub.image(reads[d], f))
        return SymbolBlock(box, tuple(letters))

    # -- periodic structure --------------------------------------------------

    def is_periodic_at(self, g: Vec, n: int) -> bool:
        """Level-n membership: the source point's structure, cellwise.

        The scaled components of ``g`` are the source components of its
        source point times the cell edge, so membership does not depend
        on which cell of the tile ``g`` occupies.
        """
        _, d = self.split(tuple(g))
        return self.source.is_periodic_at(d, n)

    def aperiodicity_witness(
        self, g: Vec, n: int, alpha: int, scan_budget: int = 100_000
    ) -> Vec:
        """Level-n lattice vector ``gamma`` with letter ``alpha`` at ``g + gamma``.

        A non-member's source point misses the whole level-n source
        structure, so scaled source translates realize every source
        letter except 0 at that point; ``alpha`` is reachable exactly
        when some non-zero source letter's image at this cell is
        ``alpha``.  The steering goes through the same index chains as
        the plain witnesses and falls back to a one-level scan for tiny
        hand-built systems.
        """
        g = tuple(g)
        if not 0 <= alpha < self.alphabet:
            raise ValueError(
                f"letter {alpha} outside the alphabet [0, {self.alphabet - 1}]"
            )
        if self.is_periodic_at(g, n):
            raise ValueError(f"{g} lies in the level-{n} periodic structure")
        f, d = self.split(g)
        t = self.sub.edge
        gamma_src = self._source_translate_with_image(
            f, d, n, lambda image: image == alpha, scan_budget
        )
        gamma = tuple(x * t for x in gamma_src)
        if self.eval(vadd(g, gamma)) != alpha or not self.family.in_lattice(
            gamma, n
        ):
            raise VerificationFailure(
                f"substituted witness {gamma} for {g} at level {n} failed "
                "re-evaluation"
            )
        return gamma

    def refutation_certificate(
        self, g: Vec, n: int, scan_budget: int = 100_000
    ) -> PeriodCertificate:
        """Verified letter conflict along ``g``'s level-n translate class."""
        g = tuple(g)
        if self.is_periodic_at(g, n):
            raise ValueError(f"{g} lies in the level-{n} periodic structure")
        f, d = self.split(g)
        t = self.sub.edge
        alpha = self.eval(g)
        gamma_src = self._source_translate_with_image(
            f, d, n, lambda image: image != alpha, scan_budget
        )
        gamma = tuple(x * t for x in gamma_src)
        beta = self.eval(vadd(g, gamma))
        if beta == alpha or not self.family.in_lattice(gamma, n):
            raise VerificationFailure(
                f"substituted witness {gamma} for {g} at level {n} failed "
                "re-evaluation"
            )
        return PeriodCertificate(point=g, level=n, translate=gamma,
                                 letter=alpha, other_letter=beta)

    def _source_translate_with_image(
        self, f: Vec, d: Vec, n: int, accept, scan_budget: int
    ) -> Vec:
        """Source translate whose letter's image at cell ``f`` is accepted."""
        src = self.source
        cell_rank = self.sub.cell_box.rank(f)
        # source letter 0 is unreachable along the translate class
        targets = [
            beta + 1
            for beta in range(1, self.sub.source_alphabet)
            if accept(self.sub.table[beta][cell_rank])
        ]
        gamma = _steered_translate(src.blocks, d, n, targets)
        if gamma is None:
            gamma = _scan_translate(
                src,
                d,
                n,
                lambda letter: accept(self.sub.table[letter][cell_rank]),
                scan_budget,
            )
        if gamma is None:
            raise VerificationFailure(
                f"no source translate near {d} at level {n} realizes an "
                f"accepted image at cell {f}"
            )
        return gamma

    def _essential_pair(self, h: Vec, n: int, scan_budget: int) -> Vec:
        """Member point whose translate by ``h`` leaves the structure.

        Splitting ``h`` into its cell remainder and source part, two
        regimes appear.  When the source part misses the source lattice,
        the scaled source witness works and the conflict point is a
        non-member outright, whatever the cells do.  When the source
        part sits in the lattice the conflict stays a member, so the
        refutation must come from the substitution itself: the corner
        cell of the image of 0 differs from every other cell, making the
        origin a witness whenever ``h`` has a non-zero cell remainder.
        """
        h = tuple(h)
        f, h_src = self.split(h)
        t = self.sub.edge
        if any(
            any(theta_component(self.source.family, h_src, i))
            for i in range(1, n + 1)
        ):
            g_src = essential_witness(self.source.family, range(1, n + 1), h_src)
            return tuple(x * t for x in g_src)
        if not any(f):
            raise ValueError(f"{h} lies in the level-{n} lattice")
        zero = (0,) * self.dimension
        if self.eval(h) != self.eval(zero):
            return zero
        # the pinned corner did not separate; scan small members of the
        # source structure for a letter whose image distinguishes the cells
        cell_rank = self.sub.cell_box.rank(f)
        box = self.source.family.domain(min(n + 1, self.source.family.levels))
        for w in box.iter_points():
            if not self.source.is_periodic_at(w, n):
                continue
            beta = self.source.eval(w)
            if self.sub.table[beta][0] != self.sub.table[beta][cell_rank]:
                return tuple(x * t for x in w)
        raise VerificationFailure(
            f"no member letter separates the corner cell from cell {f}"
        )


# ---------------------------------------------------------------------------
# Plan realization
# ---------------------------------------------------------------------------


def array_from_plan(plan) -> ToeplitzArray:
    """Constructed array realizing a verified plan's exact levels.

    The refinement rows come from the plan; the per-level arrangement
    families follow the block counts.  Below the planning threshold the
    count is a factorial and the full symmetric family realizes it; from
    the threshold up the steerable hybrid family is used, sized by the
    exact count where one exists and open-ended at the first level whose
    count survives only as an enclosure.
    """
    from .planner import assemble_scale

    scale = assemble_scale(plan)
    family = shifted_domains(scale, require_from=plan.N)
    sigmas = []
    for n in range(1, scale.levels + 1):
        m = plan.q[n - 1].value - 1
        if n < plan.N:
            if plan.q[n].value != math.factorial(m):
                raise VerificationFailure(
                    f"level-{n} block count is not {m}! despite its seed "
                    "certificate"
                )
            sigmas.append(FullSymmetricFamily(n, m))
        else:
            size = None
            if n <= plan.depth and plan.q[n].is_exact:
                size = plan.q[n].value
            sigmas.append(HybridFamily(n, m, size=size))
    return ToeplitzArray(BlockSystem(family, tuple(sigmas)))


@dataclass(frozen=True)
class PipelineResult:
    """Alphabet-reduction pipeline outcome.

    ``array`` is the substituted handle over the requested alphabet;
    ``plan`` the verified plan of the blown-up construction it factors
    through; ``edge``/``cells`` the cell box geometry (``cells`` is the
    entropy scaling factor).
    """

    plan: object
    edge: int
    cells: int
    sub: SubstitutionMap
    array: SubstitutedArray


def entropy_pipeline(
    k: int,
    d: int,
    h,
    iterations: int = 2,
    digit_budget: Optional[int] = None,
    prec: Optional[int] = None,
) -> PipelineResult:
    """Array over ``k`` letters with prescribed entropy ``h`` in ``(0, log k)``.

    Small alphabets fall below the direct construction's floor, so the
    construction runs on the blown-up alphabet of cell patterns and is
    substituted back down: scanning cube edges ``t = 1, 2, ...``, the
    least cell count ``s = t**d`` is taken whose pattern alphabet
    ``k**s`` has at least five letters, whose gap ``s*(log k - h) >= 5``
    is certified, and whose scaled entropy ``s*h`` falls certifiably
    below the attainable floor of ``k**s``.  The plan then runs at
    alphabet ``k**s`` and entropy ``s*h``, and the canonical pinned
    substitution divides the entropy back by ``s``.

    ``h`` must be exact (`Fraction`, int, or numeric string); floats are
    rejected.  Raises ``InfeasibleEntropy`` when ``h`` does not sit
    certifiably below ``log k``.
    """
    from mpmath import iv

    from .planner import exact_entropy, lambda_lower_bound, make_plan
    from .rigor import DEFAULT_DIGIT_BUDGET, Bounds, decide, iv_fraction, iv_log_int

    if k < 2:
        raise ValueError("alphabet needs at least two letters")
    if d < 1:
        raise ValueError("dimension must be positive")
    h = exact_entropy(h)
    if h <= 0:
        raise ValueError("entropy target must be positive")
    if digit_budget is None:
        digit_budget = DEFAULT_DIGIT_BUDGET

    def below_log_k(prec_bits: int):
        gap = Bounds.from_iv(iv_log_int(k) - iv_fraction(h))
        if gap.lo.as_mpf() > 0:
            return 1
        if gap.hi.as_mpf() <= 0:
            return -1
        return None

    if decide(below_log_k, start=prec, what=f"entropy against log {k}") < 0:
        raise InfeasibleEntropy(
            f"entropy {h} does not sit below log {k}; no cell count can "
            "open the required gap"
        )

    t = 1
    while True:
        s = t ** d

        def gap_certified(prec_bits: int, s: int = s):
            val = Bounds.from_iv(
                iv.mpf(s) * (iv_log_int(k) - iv_fraction(h)) - 5
            )
            if val.lo.as_mpf() >= 0:
                return 1
            if val.hi.as_mpf() < 0:
                return -1
            return None

        if decide(gap_certified, start=prec, what="cell-count gap") > 0:
            # k**s >= 5 is implied for large s; check the small cases exactly
            if s * k.bit_length() > 64 or k ** s >= 5:
                floor = lambda_lower_bound(
                    k ** s, iterations=iterations,
                    digit_budget=digit_budget, prec=prec,
                )
                if floor.lo_fraction() > s * h:
                    break
        t += 1

    plan = make_plan(
        k ** s, d, s * h,
        iterations=iterations, digit_budget=digit_budget, prec=prec,
    )
    source = array_from_plan(plan)
    sub = canonical_substitution(k, t, d)
    return PipelineResult(
        plan=plan, edge=t, cells=s, sub=sub, array=substitute(source, sub)
    )
