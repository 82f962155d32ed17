"""Diagonal lattice chains, fundamental boxes, and shifted domain families.

The combinatorial frame is a chain of finite-index sublattices
``Z^d > G_1 > G_2 > ...`` where ``G_n = P_n Z^d`` and each ``P_n`` is a
diagonal integer matrix extended by one diagonal factor per level:
``P_{n+1} = P_n Q_n``.  All geometry is axis-aligned, so matrices are
stored as their diagonals and points as plain integer tuples (Python
integers: coordinates at deep levels exceed machine words long before
the constructions get interesting).

A ``DomainFamily`` couples the chain with one fundamental box per level,
translated against the level grid so that the boxes are nested and each
lattice coset meets each box exactly once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

from .errors import CellBudgetExceeded

__all__ = [
    "Vec",
    "vadd",
    "vsub",
    "vneg",
    "DiagonalScale",
    "FundamentalDomain",
    "ScaledBox",
    "DomainFamily",
    "shifted_domains",
    "k_boundary",
    "interior_box",
]

Vec = tuple  # tuple[int, ...]; kept loose for 3.10-friendly annotations


def vadd(a: Vec, b: Vec) -> Vec:
    return tuple(x + y for x, y in zip(a, b, strict=True))


def vsub(a: Vec, b: Vec) -> Vec:
    return tuple(x - y for x, y in zip(a, b, strict=True))


def vneg(a: Vec) -> Vec:
    return tuple(-x for x in a)


def _as_vec(v: Sequence[int], d: Optional[int] = None) -> Vec:
    t = tuple(int(x) for x in v)
    if d is not None and len(t) != d:
        raise ValueError(f"expected a {d}-tuple, got {v!r}")
    return t


@dataclass(frozen=True)
class DiagonalScale:
    """Chain of diagonal refinements ``P_n = steps[0] * ... * steps[n-1]``.

    ``steps[0]`` is the diagonal of the first period matrix and
    ``steps[n]`` (n >= 1) the diagonal of the n-th refinement.  Every
    determinant must be at least 2 so each level genuinely refines the
    previous one.
    """

    steps: tuple

    def __post_init__(self):
        steps = tuple(_as_vec(s) for s in self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise ValueError("a scale needs at least one step")
        d = len(steps[0])
        for n, s in enumerate(steps):
            if len(s) != d:
                raise ValueError("all steps must share one dimension")
            if any(e < 1 for e in s):
                raise ValueError(f"step {n} has a non-positive entry: {s}")
            det = 1
            for e in s:
                det *= e
            if det < 2:
                raise ValueError(f"step {n} does not refine (determinant {det})")

    @property
    def dimension(self) -> int:
        return len(self.steps[0])

    @property
    def levels(self) -> int:
        return len(self.steps)

    def p_diag(self, n: int) -> Vec:
        """Diagonal of ``P_n``; level 0 is the identity."""
        if not 0 <= n <= self.levels:
            raise ValueError(f"level {n} outside [0, {self.levels}]")
        diag = [1] * self.dimension
        for s in self.steps[:n]:
            diag = [a * b for a, b in zip(diag, s)]
        return tuple(diag)

    def p_det(self, n: int) -> int:
        """Index of ``G_n`` in ``Z^d`` (the level-n cell count)."""
        det = 1
        for e in self.p_diag(n):
            det *= e
        return det

    def q_det(self, n: int) -> int:
        """Determinant of step ``n``; ``q_det(0)`` is the alphabet size."""
        if not 0 <= n < self.levels:
            raise ValueError(f"step {n} outside [0, {self.levels})")
        det = 1
        for e in self.steps[n]:
            det *= e
        return det


@dataclass(frozen=True)
class FundamentalDomain:
    """Axis-aligned integer box ``[lower, lower + sides)``."""

    lower: Vec
    sides: Vec

    def __post_init__(self):
        object.__setattr__(self, "lower", _as_vec(self.lower))
        object.__setattr__(self, "sides", _as_vec(self.sides, len(self.lower)))
        if any(s < 1 for s in self.sides):
            raise ValueError(f"degenerate box sides {self.sides}")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def cell_count(self) -> int:
        n = 1
        for s in self.sides:
            n *= s
        return n

    def contains(self, g: Vec) -> bool:
        return all(l <= x < l + s for x, l, s in zip(g, self.lower, self.sides))

    def upper(self) -> Vec:
        return vadd(self.lower, self.sides)

    def iter_points(self, cell_budget: Optional[int] = None) -> Iterator[Vec]:
        """Lexicographic scan (first axis slowest)."""
        if cell_budget is not None and self.cell_count() > cell_budget:
            raise CellBudgetExceeded(
                f"box holds {self.cell_count()} cells, budget {cell_budget}"
            )
        ranges = [range(l, l + s) for l, s in zip(self.lower, self.sides)]
        return (tuple(p) for p in itertools.product(*ranges))

    def rank(self, g: Vec) -> int:
        """Position of ``g`` in the lexicographic scan."""
        if not self.contains(g):
            raise ValueError(f"{g} outside box {self}")
        r = 0
        for x, l, s in zip(g, self.lower, self.sides):
            r = r * s + (x - l)
        return r

    def unrank(self, r: int) -> Vec:
        if not 0 <= r < self.cell_count():
            raise ValueError(f"rank {r} outside box of {self.cell_count()} cells")
        digits = []
        for s in reversed(self.sides):
            r, x = divmod(r, s)
            digits.append(x)
        digits.reverse()
        return tuple(l + x for l, x in zip(self.lower, digits))

    def __str__(self) -> str:
        return " x ".join(
            f"[{l}, {l + s})" for l, s in zip(self.lower, self.sides)
        )


@dataclass(frozen=True)
class ScaledBox:
    """Grid of points ``origin + (i_1*step_1, ..., i_d*step_d)``.

    Used for lattice traces of boxes (``D_n`` intersected with ``G_t``)
    and for interior position sets; supports the same lexicographic
    rank/unrank contract as :class:`FundamentalDomain`.
    """

    origin: Vec
    step: Vec
    counts: Vec

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec(self.origin))
        d = len(self.origin)
        object.__setattr__(self, "step", _as_vec(self.step, d))
        object.__setattr__(self, "counts", _as_vec(self.counts, d))
        if any(s < 1 for s in self.step):
            raise ValueError(f"non-positive step {self.step}")
        if any(c < 0 for c in self.counts):
            raise ValueError(f"negative count {self.counts}")

    @property
    def dimension(self) -> int:
        return len(self.origin)

    def count(self) -> int:
        n = 1
        for c in self.counts:
            n *= c
        return n

    def contains(self, g: Vec) -> bool:
        for x, o, s, c in zip(g, self.origin, self.step, self.counts):
            i, rem = divmod(x - o, s)
            if rem != 0 or not 0 <= i < c:
                return False
        return True

    def iter_points(self, cell_budget: Optional[int] = None) -> Iterator[Vec]:
        if cell_budget is not None and self.count() > cell_budget:
            raise CellBudgetExceeded(
                f"grid holds {self.count()} points, budget {cell_budget}"
            )
        ranges = [
            range(o, o + s * c, s)
            for o, s, c in zip(self.origin, self.step, self.counts)
        ]
        return (tuple(p) for p in itertools.product(*ranges))

    def rank(self, g: Vec) -> int:
        r = 0
        for x, o, s, c in zip(g, self.origin, self.step, self.counts):
            i, rem = divmod(x - o, s)
            if rem != 0 or not 0 <= i < c:
                raise ValueError(f"{g} not on grid {self}")
            r = r * c + i
        return r

    def unrank(self, r: int) -> Vec:
        if not 0 <= r < self.count():
            raise ValueError(f"rank {r} outside grid of {self.count()} points")
        digits = []
        for c in reversed(self.counts):
            r, i = divmod(r, c)
            digits.append(i)
        digits.reverse()
        return tuple(o + i * s for o, s, i in zip(self.origin, self.step, digits))

    def __str__(self) -> str:
        return " x ".join(
            f"{{{o} + {s}*i : 0 <= i < {c}}}"
            for o, s, c in zip(self.origin, self.step, self.counts)
        )


@dataclass(frozen=True)
class DomainFamily:
    """Nested fundamental boxes, one per level of a diagonal chain.

    ``offsets[n-1]`` is the translation ``s_n`` of the level-n box:
    ``D_n = [-s_n, P_n - s_n)``.  Validity requires ``0 <= s_1 < P_1``
    (so the origin cell stays inside the first box) and each increment
    ``s_{n+1} - s_n`` to be ``P_n r_n`` with ``0 <= r_n < Q_n``
    entrywise; this makes the boxes nested and keeps every level-n
    residue class represented exactly once.
    """

    scale: DiagonalScale
    offsets: tuple

    def __post_init__(self):
        offsets = tuple(_as_vec(o, self.scale.dimension) for o in self.offsets)
        object.__setattr__(self, "offsets", offsets)
        if len(offsets) != self.scale.levels:
            raise ValueError(
                f"{len(offsets)} offsets for {self.scale.levels} levels"
            )
        for a, (s, p) in enumerate(zip(offsets[0], self.scale.p_diag(1))):
            if not 0 <= s < p:
                raise ValueError(
                    f"first offset on axis {a} must lie in [0, {p}), got {s}"
                )
        for n in range(1, len(offsets)):
            p = self.scale.p_diag(n)
            q = self.scale.steps[n]
            delta = vsub(offsets[n], offsets[n - 1])
            for a, (dx, pa, qa) in enumerate(zip(delta, p, q)):
                r, rem = divmod(dx, pa)
                if rem != 0 or not 0 <= r < qa:
                    raise ValueError(
                        f"offset increment at level {n + 1}, axis {a} is not "
                        f"an admissible lattice shift: {delta}"
                    )

    @property
    def dimension(self) -> int:
        return self.scale.dimension

    @property
    def levels(self) -> int:
        return self.scale.levels

    def domain(self, n: int) -> FundamentalDomain:
        """Level-n box; level 0 is the single cell at the origin."""
        if n == 0:
            d = self.dimension
            return FundamentalDomain((0,) * d, (1,) * d)
        if not 1 <= n <= self.levels:
            raise ValueError(f"level {n} outside [0, {self.levels}]")
        s = self.offsets[n - 1]
        return FundamentalDomain(vneg(s), self.scale.p_diag(n))

    def project(self, g: Vec, t: int) -> Vec:
        """Representative of ``g`` modulo ``G_t`` inside the level-t box."""
        if t == 0:
            return (0,) * self.dimension
        dom = self.domain(t)
        return tuple(
            l + ((x - l) % p)
            for x, l, p in zip(g, dom.lower, self.scale.p_diag(t), strict=True)
        )

    def in_lattice(self, g: Vec, t: int) -> bool:
        """Whether ``g`` lies on ``G_t``."""
        if t == 0:
            return True
        return all(x % p == 0 for x, p in zip(g, self.scale.p_diag(t)))

    def lattice_box(self, n: int, t: int) -> ScaledBox:
        """The trace ``D_n`` on ``G_t`` as a grid (``t <= n``)."""
        if not 0 <= t <= n <= self.levels:
            raise ValueError(f"need 0 <= t <= n <= {self.levels}")
        dom = self.domain(n)
        pt = self.scale.p_diag(t)
        origin = []
        counts = []
        for l, s, p in zip(dom.lower, dom.sides, pt):
            start = -(-l // p) * p
            cnt = (l + s - 1 - start) // p + 1 if start < l + s else 0
            origin.append(start)
            counts.append(cnt)
        return ScaledBox(tuple(origin), pt, tuple(counts))

    def coset_box(self, n: int) -> ScaledBox:
        """The level-n block position set: ``D_n`` traced on ``G_{n-1}``."""
        if not 1 <= n <= self.levels:
            raise ValueError(f"level {n} outside [1, {self.levels}]")
        return self.lattice_box(n, n - 1)


def shifted_domains(
    scale: DiagonalScale,
    require_from: Optional[int] = None,
) -> DomainFamily:
    """Domain family with the quartering translation rule.

    Each refinement with every diagonal entry at least 4 contributes the
    per-axis shift ``floor(Q_n / 4)``; refinements with a smaller entry
    contribute nothing (their boxes stay anchored).  ``require_from``
    asserts that from that level on the quartering shift really applies,
    which the aperiodicity arguments need; a too-small entry there is an
    error rather than a silent zero.
    """
    d = scale.dimension
    offsets = [(0,) * d]
    for n in range(1, scale.levels):
        q = scale.steps[n]
        if min(q) >= 4:
            r = tuple(e // 4 for e in q)
        else:
            if require_from is not None and n >= require_from:
                raise ValueError(
                    f"refinement {n} has an entry below 4 ({q}); the "
                    "quartering shift is undefined there"
                )
            r = (0,) * d
        p = scale.p_diag(n)
        offsets.append(vadd(offsets[-1], tuple(pa * ra for pa, ra in zip(p, r))))
    return DomainFamily(scale, tuple(offsets))


def k_boundary(
    k_points: Iterable[Vec],
    box: FundamentalDomain,
    cell_budget: Optional[int] = 10 ** 7,
) -> tuple:
    """Points whose ``-K`` neighbourhood meets both ``box`` and its complement.

    Exact small-scale evaluation: candidates are ``box + K`` and each is
    kept when its neighbourhood straddles the box edge.  Returned in
    sorted order.
    """
    ks = [(0,) * box.dimension] if not k_points else [tuple(k) for k in k_points]
    if any(len(k) != box.dimension for k in ks):
        raise ValueError("window points must match the box dimension")
    if cell_budget is not None and box.cell_count() * len(ks) > cell_budget:
        raise CellBudgetExceeded(
            f"boundary scan touches {box.cell_count() * len(ks)} cells, "
            f"budget {cell_budget}"
        )
    candidates = set()
    for f in box.iter_points():
        for k in ks:
            candidates.add(vadd(f, k))
    out = []
    for g in candidates:
        hits = [box.contains(vsub(g, k)) for k in ks]
        if any(hits) and not all(hits):
            out.append(g)
    return tuple(sorted(out))


def interior_box(
    inner: FundamentalDomain,
    lattice_diag: Vec,
    outer: FundamentalDomain,
    g: Vec,
) -> ScaledBox:
    """Lattice translates of ``inner`` lying inside ``outer + g``.

    The returned grid holds every lattice point ``y`` (on the diagonal
    lattice given by ``lattice_diag``) with ``inner + y`` contained in
    ``outer + g``; empty counts are possible.
    """
    origin = []
    counts = []
    for li, si, p, lo, so, ga in zip(
        inner.lower, inner.sides, lattice_diag, outer.lower, outer.sides, g,
        strict=True,
    ):
        a = lo + ga - li
        b = lo + ga + so - si - li
        start = -(-a // p) * p
        cnt = (b - start) // p + 1 if b >= start else 0
        origin.append(start)
        counts.append(max(cnt, 0))
    return ScaledBox(tuple(origin), tuple(lattice_diag), tuple(counts))
