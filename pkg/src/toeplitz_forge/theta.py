"""Level decomposition of lattice points against a nested domain family.

Every ``g`` in ``Z^d`` splits along the box chain as a finite sum of
level components: the level-i component is the difference of the level-i
and level-(i-1) box representatives of ``g``.  The components lie on the
coset grids (level-i box traced on the level-(i-1) lattice), vanish
above the first level whose box contains ``g``, and are invariant under
translating ``g`` by a deeper lattice.  They drive both block evaluation
and the periodic-structure formulas, so this module is deliberately
small and heavily cross-checked by brute force in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import DepthBudgetExceeded
from .lattice import DomainFamily, Vec, vsub

__all__ = [
    "ThetaDecomposition",
    "psi_chain",
    "theta_component",
    "decompose",
    "min_zero_level",
    "essential_witness",
]


def psi_chain(family: DomainFamily, g: Vec, up_to: int) -> list:
    """Box representatives ``[psi_0(g), ..., psi_up_to(g)]``."""
    if not 0 <= up_to <= family.levels:
        raise ValueError(f"level {up_to} outside [0, {family.levels}]")
    return [family.project(g, t) for t in range(up_to + 1)]


def theta_component(family: DomainFamily, g: Vec, i: int) -> Vec:
    """Level-i component ``psi_i(g) - psi_{i-1}(g)`` (1-based level)."""
    if not 1 <= i <= family.levels:
        raise ValueError(f"level {i} outside [1, {family.levels}]")
    return vsub(family.project(g, i), family.project(g, i - 1))


@dataclass(frozen=True)
class ThetaDecomposition:
    """Components ``theta_1(g) .. theta_depth(g)`` of a point ``g``.

    ``depth`` is the first level whose box contains ``g``; all higher
    components vanish, and ``component`` reflects that by returning the
    zero vector beyond the stored depth.
    """

    point: Vec
    components: tuple

    @property
    def depth(self) -> int:
        return len(self.components)

    def component(self, i: int) -> Vec:
        if i < 1:
            raise ValueError("components are 1-based")
        if i <= self.depth:
            return self.components[i - 1]
        return (0,) * len(self.point)

    def support(self) -> tuple:
        """Levels with a non-vanishing component."""
        return tuple(
            i for i, c in enumerate(self.components, start=1) if any(c)
        )

    def total(self) -> Vec:
        acc = (0,) * len(self.point)
        for c in self.components:
            acc = tuple(x + y for x, y in zip(acc, c))
        return acc


def decompose(
    family: DomainFamily, g: Vec, depth_budget: Optional[int] = None
) -> ThetaDecomposition:
    """Full component list of ``g``; needs a level whose box contains ``g``.

    Raises :class:`DepthBudgetExceeded` when no box within the budget
    (or within the exactly represented levels) contains ``g``.
    """
    limit = family.levels if depth_budget is None else min(depth_budget, family.levels)
    g = tuple(g)
    depth = None
    for n in range(limit + 1):
        if family.domain(n).contains(g):
            depth = n
            break
    if depth is None:
        raise DepthBudgetExceeded(
            f"point {g} escapes every box up to level {limit}",
            point=g,
            budget=limit,
        )
    chain = psi_chain(family, g, depth)
    comps = tuple(vsub(chain[i], chain[i - 1]) for i in range(1, depth + 1))
    return ThetaDecomposition(g, comps)


def min_zero_level(
    family: DomainFamily, g: Vec, depth_budget: Optional[int] = None
) -> int:
    """First level with vanishing component.

    For ``g`` inside the deepest available box without an earlier
    vanishing component the answer is one past that level (its
    representative there is ``g`` itself, so the next difference is
    zero regardless of deeper scale data).
    """
    limit = family.levels if depth_budget is None else min(depth_budget, family.levels)
    g = tuple(g)
    prev = family.project(g, 0)
    for i in range(1, limit + 1):
        cur = family.project(g, i)
        if cur == prev:
            return i
        prev = cur
    if family.domain(limit).contains(g):
        return limit + 1
    raise DepthBudgetExceeded(
        f"no vanishing component for {g} up to level {limit} and the point "
        "escapes the deepest box",
        point=g,
        budget=limit,
    )


def essential_witness(
    family: DomainFamily, levels: Iterable[int], h: Vec
) -> Vec:
    """Companion point whose component support complements ``h`` on ``levels``.

    For each requested level the witness takes the zero component when
    ``h`` has a non-vanishing one there, and the lexicographically least
    non-zero coset point otherwise.  The sum of the chosen components is
    returned; its decomposition reproduces them level by level.
    """
    lvl = sorted(set(int(i) for i in levels))
    if not lvl:
        return (0,) * family.dimension
    if lvl[0] < 1 or lvl[-1] > family.levels:
        raise ValueError(f"levels {lvl} outside [1, {family.levels}]")
    g = (0,) * family.dimension
    for i in lvl:
        if any(theta_component(family, h, i)):
            continue
        box = family.coset_box(i)
        gamma = box.unrank(0)
        if not any(gamma):
            if box.count() < 2:
                raise ValueError(f"level {i} has no non-zero coset point")
            gamma = box.unrank(1)
        g = tuple(x + y for x, y in zip(g, gamma))
    return g
