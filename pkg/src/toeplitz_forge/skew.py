"""Skew-product coordinates of translated arrays.

A translate ``g . x`` of a periodic-structure array splits into two
coordinates: the class of ``g`` modulo the level-t lattice, and the
"derived" array that reads off whole level-t windows instead of single
letters.  Addition in the first coordinate overflows the level-t box
now and then, and the carry of that overflow shifts the second
coordinate.  This module computes both coordinates exactly and checks
the carry identity cell by cell:

* :func:`pi_t` — boxed representative of a handle's translation,
* :func:`epsilon_t` — the integer carry vector of adding ``g`` to a
  coset representative,
* :func:`w_t` — the level-t window read at a lattice position,
* :func:`derived_array_eval` — one letter of the derived array, coded
  over the window census,
* :func:`skew_equivariance_check` — verdict that translating the array
  matches the carry-shifted derived array on a finite window,
* :class:`OdometerCoordinate` — the compatible tower of representatives
  of a single group element across all levels.

Everything here is exact integer arithmetic; no rounding enters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .analysis import census
from .errors import CellBudgetExceeded, VerificationFailure
from .blocks import SymbolBlock
from .lattice import DomainFamily, FundamentalDomain, Vec, vadd, vsub
from .toeplitz import ArrayLike, TranslatedArray

__all__ = [
    "OdometerCoordinate",
    "translation",
    "pi_t",
    "epsilon_t",
    "w_t",
    "derived_array_eval",
    "skew_records",
    "SkewVerdict",
    "skew_equivariance_check",
    "SKEW_SCHEMA",
]


def translation(handle: ArrayLike) -> Vec:
    """Total translation of a (possibly nested) translate handle.

    A bare array translates by zero; each :class:`TranslatedArray`
    wrapper adds its shift.
    """
    shift = (0,) * handle.dimension
    while isinstance(handle, TranslatedArray):
        shift = vadd(shift, handle.shift)
        handle = handle.base
    return shift


def _base(handle: ArrayLike) -> ArrayLike:
    while isinstance(handle, TranslatedArray):
        handle = handle.base
    return handle


@dataclass(frozen=True)
class OdometerCoordinate:
    """Tower of box representatives of one group element.

    ``reps[n-1]`` is the level-n box representative; consecutive levels
    must be compatible (the deeper representative reduces to the
    shallower one).  Two group elements share a coordinate exactly when
    they differ by a vector of the deepest recorded lattice.
    """

    family: DomainFamily
    reps: tuple

    def __post_init__(self):
        reps = tuple(tuple(int(c) for c in r) for r in self.reps)
        object.__setattr__(self, "reps", reps)
        if not 1 <= len(reps) <= self.family.levels:
            raise ValueError(
                f"{len(reps)} levels for a {self.family.levels}-level family"
            )
        for n, rep in enumerate(reps, start=1):
            if not self.family.domain(n).contains(rep):
                raise ValueError(f"level-{n} entry {rep} outside its box")
        for n in range(2, len(reps) + 1):
            if self.family.project(reps[n - 1], n - 1) != reps[n - 2]:
                raise ValueError(
                    f"level-{n} entry {reps[n - 1]} does not reduce to "
                    f"the level-{n - 1} entry {reps[n - 2]}"
                )

    @property
    def depth(self) -> int:
        return len(self.reps)

    def rep(self, n: int) -> Vec:
        """Level-n representative."""
        return self.reps[n - 1]

    @classmethod
    def from_vector(
        cls,
        family: DomainFamily,
        g: Sequence[int],
        depth: Optional[int] = None,
    ) -> "OdometerCoordinate":
        if depth is None:
            depth = family.levels
        g = tuple(int(c) for c in g)
        return cls(
            family,
            tuple(family.project(g, n) for n in range(1, depth + 1)),
        )


def pi_t(
    handle: ArrayLike,
    t: int,
    window: Optional[FundamentalDomain] = None,
    cell_budget: Optional[int] = 10 ** 6,
) -> Vec:
    """Level-t box representative of the handle's translation.

    Computed algebraically from the translation carried by the handle.
    With a ``window``, additionally cross-checks the defining property
    on that box: wherever the base array is level-t periodic at
    ``w + pi``, the handle must read the base letter there.  Requires
    the base handle to answer ``is_periodic_at``.
    """
    fam = handle.family
    if not 1 <= t <= fam.levels:
        raise ValueError(f"level {t} outside [1, {fam.levels}]")
    pi = fam.project(translation(handle), t)
    if window is not None:
        base = _base(handle)
        member = getattr(base, "is_periodic_at", None)
        if member is None:
            raise TypeError(
                "window verification needs a base handle with a "
                "periodic-position test"
            )
        if cell_budget is not None and window.cell_count() > cell_budget:
            raise CellBudgetExceeded(
                f"verification window spans {window.cell_count()} cells, "
                f"budget {cell_budget}"
            )
        for w in window.iter_points():
            z = vadd(w, pi)
            if member(z, t) and handle.eval(w) != base.eval(z):
                raise VerificationFailure(
                    f"translate disagrees with its base at {w}: the base "
                    f"is level-{t} periodic at {z} but the letters differ"
                )
    return pi


def epsilon_t(
    family: DomainFamily,
    g: Sequence[int],
    h: Sequence[int],
    t: int,
) -> Vec:
    """Carry vector of adding ``g`` to the level-t class of ``h``.

    Exact integer vector ``e`` with ``P_t e = g + psi(h) - psi(g + h)``
    where ``psi`` is the level-t box representative.  Depends on ``h``
    only through its level-t class.
    """
    if not 1 <= t <= family.levels:
        raise ValueError(f"level {t} outside [1, {family.levels}]")
    g = tuple(int(c) for c in g)
    h = tuple(int(c) for c in h)
    num = vsub(vadd(g, family.project(h, t)), family.project(vadd(g, h), t))
    carry = []
    for c, p in zip(num, family.scale.p_diag(t)):
        quo, rem = divmod(c, p)
        if rem:
            raise VerificationFailure(
                f"carry numerator {num} is not a level-{t} lattice vector"
            )
        carry.append(quo)
    return tuple(carry)


def w_t(
    handle: ArrayLike,
    gamma: Sequence[int],
    t: int,
    depth_budget: Optional[int] = None,
    cell_budget: Optional[int] = 10 ** 6,
) -> SymbolBlock:
    """Level-t window of the handle at lattice position ``gamma``.

    Reads ``handle(d + gamma - pi_t(handle))`` for every cell ``d`` of
    the level-t box; for an untranslated array at ``gamma = 0`` this is
    its first level-t block.
    """
    fam = handle.family
    gamma = tuple(int(c) for c in gamma)
    if not fam.in_lattice(gamma, t):
        raise ValueError(f"{gamma} is not a level-{t} lattice vector")
    dom = fam.domain(t)
    if cell_budget is not None and dom.cell_count() > cell_budget:
        raise CellBudgetExceeded(
            f"window spans {dom.cell_count()} cells, budget {cell_budget}"
        )
    corner = vsub(gamma, pi_t(handle, t))
    return SymbolBlock(
        dom,
        tuple(
            handle.eval(vadd(d, corner), depth_budget)
            for d in dom.iter_points()
        ),
    )


def derived_array_eval(
    handle: ArrayLike,
    t: int,
    g: Sequence[int],
    alphabet: Optional[Sequence[SymbolBlock]] = None,
    depth_budget: Optional[int] = None,
    cell_budget: Optional[int] = 10 ** 6,
) -> int:
    """Letter ``g`` of the level-t derived array of the handle.

    The derived array reads the window at lattice position ``P_t g``
    and codes it over the window census of the untranslated base array
    (first-occurrence order).  Pass ``alphabet`` to reuse a census
    across many cells.
    """
    fam = handle.family
    if alphabet is None:
        alphabet = census(_base(handle), t, cell_budget=cell_budget)
    gamma = tuple(
        int(c) * p for c, p in zip(g, fam.scale.p_diag(t))
    )
    block = w_t(handle, gamma, t, depth_budget, cell_budget)
    for i, known in enumerate(alphabet):
        if known == block:
            return i
    raise VerificationFailure(
        f"window at {gamma} is missing from the {len(alphabet)}-letter "
        f"level-{t} census"
    )


@dataclass(frozen=True)
class SkewVerdict:
    """Outcome of one skew-product translation check."""

    t: int
    g: Vec
    base_rep: Vec
    image_rep: Vec
    carry: Vec
    coset_ok: bool
    mismatches: tuple
    cells: int

    @property
    def passed(self) -> bool:
        return self.coset_ok and not self.mismatches


SKEW_SCHEMA = "toeplitz-forge-skew v1"


def skew_records(verdict: SkewVerdict) -> str:
    """Line-delimited verdict export."""

    def fmt(v: Vec) -> str:
        return ",".join(str(c) for c in v)

    lines = [
        SKEW_SCHEMA,
        f"level {verdict.t}",
        f"translate {fmt(verdict.g)}",
        f"coset {fmt(verdict.base_rep)} {fmt(verdict.image_rep)} "
        f"{'ok' if verdict.coset_ok else 'mismatch'}",
        f"carry {fmt(verdict.carry)}",
        f"cells {verdict.cells} mismatches {len(verdict.mismatches)}",
    ]
    for h in verdict.mismatches:
        lines.append(f"mismatch {fmt(h)}")
    lines.append(f"verdict {'pass' if verdict.passed else 'fail'}")
    return "\n".join(lines) + "\n"


def skew_equivariance_check(
    handle: ArrayLike,
    g: Sequence[int],
    t: int,
    window: FundamentalDomain,
    depth_budget: Optional[int] = None,
    cell_budget: Optional[int] = 10 ** 6,
) -> SkewVerdict:
    """Check that translating by ``g`` acts as a skew product.

    Two facts are verified for ``y = handle``:

    * the image translation represents ``g + pi_t(y)`` modulo the
      level-t lattice, and
    * on every cell ``h`` of ``window``, the derived array of ``g . y``
      equals the derived array of ``y`` shifted by the carry
      ``epsilon_t(g, pi_t(y))``.

    Both derived arrays are coded over the same census alphabet, so a
    mismatch pinpoints a cell where the carry bookkeeping breaks.
    """
    fam = handle.family
    g = tuple(int(c) for c in g)
    pi_y = pi_t(handle, t)
    shifted = TranslatedArray(handle, g)
    pi_gy = pi_t(shifted, t)
    carry = epsilon_t(fam, g, pi_y, t)
    coset_ok = pi_gy == fam.project(vadd(g, pi_y), t)

    cells = window.cell_count() * fam.domain(t).cell_count()
    if cell_budget is not None and 2 * cells > cell_budget:
        raise CellBudgetExceeded(
            f"equivariance sweep touches {2 * cells} cells, "
            f"budget {cell_budget}"
        )
    alphabet = census(_base(handle), t, cell_budget=cell_budget)
    mismatches = []
    for h in window.iter_points():
        left = derived_array_eval(
            shifted, t, h, alphabet, depth_budget, cell_budget
        )
        right = derived_array_eval(
            handle, t, vadd(h, carry), alphabet, depth_budget, cell_budget
        )
        if left != right:
            mismatches.append(h)
    return SkewVerdict(
        t=t,
        g=g,
        base_rep=pi_y,
        image_rep=pi_gy,
        carry=carry,
        coset_ok=coset_ok,
        mismatches=tuple(mismatches),
        cells=window.cell_count(),
    )
