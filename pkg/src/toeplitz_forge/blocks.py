"""Block families: indexed permutations, block evaluation, materialization.

A construction carries one permutation family per level.  The level-n
family is a sequence of bijections from the non-zero level-n coset
points onto the level-(n-1) block indices ``{2, ..., q_{n-1}}``; block
``n`` number ``j`` is assembled by pasting, at each non-zero coset point
``gamma``, the level-(n-1) block selected by the j-th bijection, with
block number 1 always at the origin.  Families are stored as index
arithmetic, never as tables, so a block with astronomically many cells
is still evaluable pointwise; nothing below ever materializes a
factorial of a large argument.

Families come in three shapes:

* full-symmetric: all ``m!`` bijections, ordered by Lehmer rank;
* hybrid: the ``m`` cyclic shifts first, then bijections that pin the
  first coset point, ordered by Lehmer rank of the remainder (capacity
  ``m + (m-1)! - 1``);
* explicit: a literal table, for small hand-built systems.

The first member of every family is the order-preserving bijection.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Optional, Sequence

from .errors import CellBudgetExceeded
from .lattice import DomainFamily, FundamentalDomain, Vec

__all__ = [
    "lehmer_rank",
    "lehmer_unrank",
    "constrained_min_rank",
    "PermutationFamily",
    "FullSymmetricFamily",
    "HybridFamily",
    "ExplicitFamily",
    "CoverageRecord",
    "SymbolBlock",
    "BlockSystem",
    "block_eval",
    "materialize",
]


# ---------------------------------------------------------------------------
# Lehmer codes
# ---------------------------------------------------------------------------


def lehmer_rank(perm: Sequence[int]) -> int:
    """Lexicographic rank of a permutation of ``0..n-1``.

    Fenwick-tree count of smaller unused values; O(n log n) with exact
    big-integer ranks.
    """
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"not a permutation of 0..{n - 1}: {perm!r}")
    tree = [0] * (n + 1)

    def add(i, v):
        i += 1
        while i <= n:
            tree[i] += v
            i += i & (-i)

    def prefix(i):  # count of unused values < i
        s = 0
        while i > 0:
            s += tree[i]
            i -= i & (-i)
        return s

    for v in range(n):
        add(v, 1)
    rank = 0
    fact = factorial(n - 1) if n else 1
    for i, v in enumerate(perm):
        rank += prefix(v) * fact
        add(v, -1)
        if i < n - 1:
            fact //= n - 1 - i
    return rank


def lehmer_unrank(rank: int, n: int) -> tuple:
    """Permutation of ``0..n-1`` with the given lexicographic rank."""
    if rank < 0 or not _factorial_exceeds(n, rank):
        raise ValueError(f"rank {rank} outside [0, {n}!)")
    digits = []
    fact = factorial(n - 1) if n else 1
    for i in range(n - 1, -1, -1):
        d, rank = divmod(rank, fact)
        digits.append(d)
        if i:
            fact //= i
    # digits[i] = number of unused values smaller than the chosen one
    avail = list(range(n))
    out = []
    for d in digits:
        out.append(avail.pop(d))
    return tuple(out)


def _factorial_exceeds(n: int, v: int) -> bool:
    """Whether ``n! > v`` without computing large factorials."""
    if v < 0:
        return True
    prod = 1
    for i in range(2, n + 1):
        prod *= i
        if prod > v:
            return True
    return prod > v


def lehmer_value_at(rank: int, n: int, pos: int) -> int:
    """Value at one position of the rank-``rank`` permutation of ``0..n-1``.

    For ranks far below ``n!`` the permutation is the identity outside a
    short suffix, so the value is recovered from a small unranking even
    when ``n`` itself is too large to materialize.
    """
    if not 0 <= pos < n:
        raise ValueError(f"position {pos} outside 0..{n - 1}")
    if rank < 0 or not _factorial_exceeds(n, rank):
        raise ValueError(f"rank {rank} outside [0, {n}!)")
    t = 0
    while not _factorial_exceeds(t, rank):
        t += 1
    # identity on the first n - t positions, suffix permuted among the
    # last t values
    if pos < n - t:
        return pos
    suffix = lehmer_unrank(rank, t)
    return (n - t) + suffix[pos - (n - t)]


def constrained_min_rank(n: int, pos: int, val: int) -> Optional[int]:
    """Least positive Lehmer rank among permutations with ``perm[pos] == val``.

    Rank 0 (the identity) is excluded by definition.  Returns ``None``
    when no non-identity permutation satisfies the pin, which happens
    only for ``n <= 2`` with an identity pin.
    """
    if not (0 <= pos < n and 0 <= val < n):
        raise ValueError(f"pin ({pos} -> {val}) outside 0..{n - 1}")
    if val != pos:
        # Greedy lexicographic minimum: positions before the pin take the
        # smallest unused values, skipping the reserved one.
        used = set()
        perm = []
        for i in range(n):
            if i == pos:
                perm.append(val)
                used.add(val)
                continue
            for v in range(n):
                if v not in used and v != val:
                    perm.append(v)
                    used.add(v)
                    break
            else:  # only the reserved value remains
                return None
        return lehmer_rank(perm)
    # Identity pin: the lexicographic minimum is the identity itself, so
    # swap the last two positions that are free to move.
    free = [i for i in range(n) if i != pos]
    if len(free) < 2:
        return None
    a, b = free[-2], free[-1]
    perm = list(range(n))
    perm[a], perm[b] = perm[b], perm[a]
    return lehmer_rank(perm)


# ---------------------------------------------------------------------------
# Permutation families
# ---------------------------------------------------------------------------

# Families whose tables would stay tiny can be checked pair by pair.
_EXHAUSTIVE_M = 5

# Above this domain size, point lookups avoid materializing permutations.
_SPARSE_M = 10_000


@lru_cache(maxsize=512)
def _cached_unrank(rank: int, n: int) -> tuple:
    return lehmer_unrank(rank, n)


@dataclass(frozen=True)
class CoverageRecord:
    """Result of checking that a family realizes every (point, target) pair."""

    level: int
    kind: str
    pairs: int
    exhaustive: bool
    ok: bool
    detail: str = ""


class PermutationFamily:
    """Common protocol: bijections indexed from 1, targets in ``{2..m+1}``."""

    level: int
    m: int

    def member_count(self) -> Optional[int]:
        """Number of bijections when exactly known, else ``None``."""
        raise NotImplementedError

    def index_valid(self, index: int) -> bool:
        raise NotImplementedError

    def target(self, index: int, r: int) -> int:
        """Image of the rank-r domain point under bijection ``index``."""
        raise NotImplementedError

    def solve(self, r: int, t: int, min_index: int = 1) -> Optional[int]:
        """Least bijection index >= ``min_index`` sending rank ``r`` to ``t``."""
        raise NotImplementedError

    def solve_all(self, r: int, t: int, min_index: int = 1, limit: int = 4) -> tuple:
        """A few distinct indices >= ``min_index`` sending ``r`` to ``t``.

        Used by backtracking searches; the default draws on ``solve``
        and is overridden where richer candidate sets are cheap.
        """
        j = self.solve(r, t, min_index)
        return () if j is None else (j,)

    def base_preimage(self, t: int) -> Optional[int]:
        """Domain rank the first member sends to ``t``; scan by default."""
        for r in range(1, self.m + 1):
            if self.target(1, r) == t:
                return r
        return None

    def coverage(self, min_index: int = 1) -> CoverageRecord:
        """Whether every (rank, target) pair is realized by some member.

        ``min_index=2`` excludes the order-preserving member, which is
        the case that matters for refutation chains: indices produced
        mid-chain are always at least 2, so a pair reachable only
        through index 1 is unreachable along a translate class.
        """
        raise NotImplementedError

    # -- shared helpers -----------------------------------------------------

    def _check_args(self, index: int, r: int) -> None:
        if index < 1:
            raise ValueError(f"bijection indices are 1-based, got {index}")
        if not self.index_valid(index):
            raise ValueError(f"bijection {index} beyond the family")
        if not 1 <= r <= self.m:
            raise ValueError(f"domain rank {r} outside 1..{self.m}")

    def _check_pair(self, r: int, t: int) -> None:
        if not (1 <= r <= self.m and 2 <= t <= self.m + 1):
            raise ValueError(f"pair (rank {r}, target {t}) out of range")

    def _exhaustive_coverage(self, kind: str, min_index: int) -> CoverageRecord:
        cap = self.member_count()
        ok = True
        detail = ""
        for r in range(1, self.m + 1):
            seen = {self.target(j, r) for j in range(min_index, cap + 1)}
            missing = set(range(2, self.m + 2)) - seen
            if missing:
                ok = False
                detail = f"rank {r} misses targets {sorted(missing)}"
                break
        return CoverageRecord(self.level, kind, self.m * self.m, True, ok, detail)


@dataclass(frozen=True)
class FullSymmetricFamily(PermutationFamily):
    """All ``m!`` bijections in Lehmer order (index 1 = order-preserving)."""

    level: int
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("empty domain")

    def member_count(self) -> Optional[int]:
        if self.m <= 2000:
            return factorial(self.m)
        return None  # exactly m!, but not worth materializing

    def index_valid(self, index: int) -> bool:
        return index >= 1 and _factorial_exceeds(self.m, index - 1)

    def target(self, index: int, r: int) -> int:
        self._check_args(index, r)
        if self.m > _SPARSE_M:
            return lehmer_value_at(index - 1, self.m, r - 1) + 2
        return _cached_unrank(index - 1, self.m)[r - 1] + 2

    def solve(self, r: int, t: int, min_index: int = 1) -> Optional[int]:
        self._check_pair(r, t)
        if min_index <= 1 and t - 2 == r - 1:
            return 1  # the order-preserving member already matches
        if min_index <= 2:
            rank = constrained_min_rank(self.m, r - 1, t - 2)
            return None if rank is None else rank + 1
        if self.m <= 8:
            for j in range(min_index, factorial(self.m) + 1):
                if self.target(j, r) == t:
                    return j
            return None
        raise NotImplementedError(
            "lower-bounded solving beyond index 2 is only used for small "
            "families"
        )

    def solve_all(self, r: int, t: int, min_index: int = 1, limit: int = 4) -> tuple:
        self._check_pair(r, t)
        if self.m <= 6:
            out = []
            for j in range(max(min_index, 1), factorial(self.m) + 1):
                if self.target(j, r) == t:
                    out.append(j)
                    if len(out) >= limit:
                        break
            return tuple(out)
        j = self.solve(r, t, min_index)
        return () if j is None else (j,)

    def base_preimage(self, t: int) -> Optional[int]:
        # the first member is order-preserving: rank r goes to r + 1
        return t - 1 if 2 <= t <= self.m + 1 else None

    def coverage(self, min_index: int = 1) -> CoverageRecord:
        if self.m <= _EXHAUSTIVE_M:
            return self._exhaustive_coverage("full-symmetric", min_index)
        # Structural: (m-1)! members realize each pair, so even after
        # dropping the order-preserving one at least one remains.
        ok = min_index <= 1 or self.m >= 3
        return CoverageRecord(
            self.level, "full-symmetric", self.m * self.m, False, ok,
            "all bijections present",
        )


@dataclass(frozen=True)
class HybridFamily(PermutationFamily):
    """Cyclic shifts followed by pinned-first-point bijections.

    Index ``j <= m`` is the cyclic shift by ``j - 1``; index ``j > m``
    pins the first coset point to target 2 and permutes the remaining
    ranks by the Lehmer code of ``j - m`` (reduced rank 0 would repeat
    index 1, hence the offset).  ``size`` is the member count when a
    construction knows it exactly; ``None`` leaves indices bounded by
    the capacity ``m + (m-1)! - 1`` alone.
    """

    level: int
    m: int
    size: Optional[int] = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("hybrid families need at least two domain points")
        if self.size is not None:
            if self.size < 1:
                raise ValueError("empty family")
            if self.size > self.m and not _factorial_exceeds(
                self.m - 1, self.size - self.m
            ):
                raise ValueError(
                    f"size {self.size} exceeds capacity m + (m-1)! - 1"
                )

    def member_count(self) -> Optional[int]:
        return self.size

    def index_valid(self, index: int) -> bool:
        if index < 1:
            return False
        if self.size is not None:
            return index <= self.size
        return index <= self.m or _factorial_exceeds(self.m - 1, index - self.m)

    def target(self, index: int, r: int) -> int:
        self._check_args(index, r)
        if index <= self.m:
            return 2 + ((r - 1 + index - 1) % self.m)
        rho = index - self.m  # Lehmer rank of the reduced permutation, >= 1
        if r == 1:
            return 2
        if self.m - 1 > _SPARSE_M:
            return lehmer_value_at(rho, self.m - 1, r - 2) + 3
        return _cached_unrank(rho, self.m - 1)[r - 2] + 3

    def solve(self, r: int, t: int, min_index: int = 1) -> Optional[int]:
        self._check_pair(r, t)
        candidates = []
        j_cyc = ((t - r - 1) % self.m) + 1
        if j_cyc >= min_index and self.index_valid(j_cyc):
            candidates.append(j_cyc)
        tail_floor = max(min_index, self.m + 1)
        if self.index_valid(tail_floor):
            if r == 1:
                if t == 2:
                    candidates.append(tail_floor)  # every tail member works
            elif t >= 3:
                if tail_floor == self.m + 1:
                    rank = constrained_min_rank(self.m - 1, r - 2, t - 3)
                    if rank is not None and self.index_valid(self.m + rank):
                        candidates.append(self.m + rank)
                elif self.m - 1 <= 8 and self.size is not None:
                    for j in range(tail_floor, self.size + 1):
                        if self.target(j, r) == t:
                            candidates.append(j)
                            break
                else:
                    raise NotImplementedError(
                        "deep lower-bounded tail solving is only used for "
                        "small families"
                    )
        return min(candidates) if candidates else None

    def solve_all(self, r: int, t: int, min_index: int = 1, limit: int = 4) -> tuple:
        self._check_pair(r, t)
        out = []
        j_cyc = ((t - r - 1) % self.m) + 1
        if j_cyc >= min_index and self.index_valid(j_cyc):
            out.append(j_cyc)
        if self.m - 1 <= 8 and self.size is not None:
            j = max(min_index, self.m + 1)
            while j <= self.size and len(out) < limit:
                if self.target(j, r) == t:
                    out.append(j)
                j += 1
        else:
            tail_floor = max(min_index, self.m + 1)
            if self.index_valid(tail_floor):
                if r == 1 and t == 2:
                    out.append(tail_floor)
                elif r >= 2 and t >= 3 and tail_floor == self.m + 1:
                    rank = constrained_min_rank(self.m - 1, r - 2, t - 3)
                    if rank is not None and self.index_valid(self.m + rank):
                        out.append(self.m + rank)
        return tuple(sorted(set(out))[:limit])

    def base_preimage(self, t: int) -> Optional[int]:
        # the zero shift is order-preserving: rank r goes to r + 1
        return t - 1 if 2 <= t <= self.m + 1 else None

    def coverage(self, min_index: int = 1) -> CoverageRecord:
        cap = self.member_count()
        if self.m <= _EXHAUSTIVE_M and cap is not None and cap <= 1000:
            return self._exhaustive_coverage("hybrid", min_index)
        if min_index <= 1:
            ok = cap is None or cap >= self.m
            detail = "cyclic shifts realize every pair" if ok else (
                f"family truncated below the {self.m} cyclic shifts"
            )
        elif self.m < 4:
            ok = False
            detail = "pairs (r, r+1) need tail members that do not exist"
        else:
            # Cyclic shifts other than the zero shift realize every pair
            # except (r, r+1); those need a tail member fixing domain
            # position r - 2, and reduced ranks 1..5 supply one for
            # every position once three or more points are shuffled.
            need = self.m + 5
            ok = cap is None or cap >= need
            detail = (
                f"tail members through rank {need - self.m} present"
                if ok
                else f"(r, r+1) pairs need {need} members, have {cap}"
            )
        return CoverageRecord(
            self.level, "hybrid", self.m * self.m, False, ok, detail,
        )


@dataclass(frozen=True)
class ExplicitFamily(PermutationFamily):
    """Literal table of bijections; rows are target sequences."""

    level: int
    table: tuple

    def __post_init__(self):
        table = tuple(tuple(int(t) for t in row) for row in self.table)
        object.__setattr__(self, "table", table)
        if not table:
            raise ValueError("empty family")
        m = len(table[0])
        want = set(range(2, m + 2))
        for idx, row in enumerate(table, start=1):
            if len(row) != m or set(row) != want:
                raise ValueError(
                    f"row {idx} is not a bijection onto {sorted(want)}: {row}"
                )

    @property
    def m(self) -> int:  # type: ignore[override]
        return len(self.table[0])

    def member_count(self) -> int:
        return len(self.table)

    def index_valid(self, index: int) -> bool:
        return 1 <= index <= len(self.table)

    def target(self, index: int, r: int) -> int:
        self._check_args(index, r)
        return self.table[index - 1][r - 1]

    def solve(self, r: int, t: int, min_index: int = 1) -> Optional[int]:
        self._check_pair(r, t)
        for j in range(max(min_index, 1), len(self.table) + 1):
            if self.table[j - 1][r - 1] == t:
                return j
        return None

    def solve_all(self, r: int, t: int, min_index: int = 1, limit: int = 4) -> tuple:
        self._check_pair(r, t)
        out = []
        for j in range(max(min_index, 1), len(self.table) + 1):
            if self.table[j - 1][r - 1] == t:
                out.append(j)
                if len(out) >= limit:
                    break
        return tuple(out)

    def coverage(self, min_index: int = 1) -> CoverageRecord:
        return self._exhaustive_coverage("explicit", min_index)


# ---------------------------------------------------------------------------
# Symbol blocks and evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolBlock:
    """Letters on a box, stored flat in the box's lexicographic order."""

    domain: FundamentalDomain
    letters: tuple

    def __post_init__(self):
        letters = tuple(int(a) for a in self.letters)
        object.__setattr__(self, "letters", letters)
        if len(letters) != self.domain.cell_count():
            raise ValueError(
                f"{len(letters)} letters for {self.domain.cell_count()} cells"
            )

    def letter_at(self, g: Vec) -> int:
        return self.letters[self.domain.rank(g)]

    def translate(self, v: Vec) -> "SymbolBlock":
        dom = FundamentalDomain(
            tuple(l + x for l, x in zip(self.domain.lower, v)),
            self.domain.sides,
        )
        return SymbolBlock(dom, self.letters)


@dataclass(frozen=True)
class BlockSystem:
    """Domain family plus one permutation family per level."""

    family: DomainFamily
    sigmas: tuple

    def __post_init__(self):
        sigmas = tuple(self.sigmas)
        object.__setattr__(self, "sigmas", sigmas)
        if len(sigmas) != self.family.levels:
            raise ValueError(
                f"{len(sigmas)} permutation families for "
                f"{self.family.levels} levels"
            )
        for n, fam in enumerate(sigmas, start=1):
            if fam.level != n:
                raise ValueError(f"family at position {n} labeled {fam.level}")
            want = self.family.coset_box(n).count() - 1
            if fam.m != want:
                raise ValueError(
                    f"level {n} family acts on {fam.m} points, box has {want}"
                )

    @property
    def alphabet(self) -> int:
        return self.family.scale.q_det(0)

    def sigma(self, n: int) -> PermutationFamily:
        return self.sigmas[n - 1]

    def block_count(self, level: int) -> Optional[int]:
        """Number of level blocks when the scale knows it exactly."""
        if level == 0:
            return self.alphabet
        if level < self.family.levels:
            return self.family.scale.q_det(level)
        return None

    def domain_rank(self, n: int, gamma: Vec) -> int:
        """1-based rank of a non-zero coset point in the lex scan."""
        box = self.family.coset_box(n)
        r = box.rank(tuple(gamma))
        z = box.rank((0,) * self.family.dimension)
        if r == z:
            raise ValueError("the zero point has no rank")
        return r + 1 if r < z else r

    def domain_unrank(self, n: int, r: int) -> Vec:
        box = self.family.coset_box(n)
        z = box.rank((0,) * self.family.dimension)
        if not 1 <= r <= box.count() - 1:
            raise ValueError(f"rank {r} outside 1..{box.count() - 1}")
        idx = r - 1 if r - 1 < z else r
        return box.unrank(idx)


def block_eval(system: BlockSystem, level: int, index: int, h: Vec) -> int:
    """Letter of block ``(level, index)`` at cell ``h``.

    Descends one level per step: the level-i component of ``h`` names
    the sub-block position; the zero component keeps the privileged
    sub-block 1, any other selects through the indexed bijection.
    """
    fam = system.family
    h = tuple(h)
    if not fam.domain(level).contains(h):
        raise ValueError(f"cell {h} outside the level-{level} box")
    if index < 1:
        raise ValueError("block indices are 1-based")
    cap = system.block_count(level)
    if cap is not None and index > cap:
        raise ValueError(f"block ({level}, {index}) beyond the {cap} blocks")
    if level == 0:
        return index - 1
    chain = [fam.project(h, t) for t in range(level + 1)]
    j = index
    for i in range(level, 0, -1):
        theta = tuple(a - b for a, b in zip(chain[i], chain[i - 1]))
        if any(theta):
            j = system.sigma(i).target(j, system.domain_rank(i, theta))
        else:
            j = 1
    return j - 1


def materialize(
    system: BlockSystem,
    level: int,
    index: int,
    cell_budget: Optional[int] = 10 ** 6,
) -> SymbolBlock:
    """Full letter grid of a block; refuses oversized boxes."""
    dom = system.family.domain(level)
    if cell_budget is not None and dom.cell_count() > cell_budget:
        raise CellBudgetExceeded(
            f"block spans {dom.cell_count()} cells, budget {cell_budget}"
        )
    letters = tuple(
        block_eval(system, level, index, h) for h in dom.iter_points()
    )
    return SymbolBlock(dom, letters)
