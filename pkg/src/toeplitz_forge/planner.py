"""Parameter planning: from an alphabet and an entropy target to a scale.

The plan fixes, in order: the seed sequences obtained by iterating
``q -> (q-1)!`` (whose per-level rates ``log(q'_n)/p'_n`` decrease to the
entropy ceiling of the alphabet), a certified lower bound for that
ceiling, the box growth constant ``M``, the switch level ``N`` where the
construction leaves the seed sequences, and one block count per level
beyond.  Each block count is the smallest admissible multiple, so plans
are deterministic.

Every inequality behind these choices is decided by the rigorous
interval layer and recorded as a certificate.  Integers that outgrow the
digit budget degrade to log-enclosures; the plan keeps extending past
them for as long as the certificates remain decidable (one level past
the last level with an exact cell count) and stops honestly there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from mpmath import iv

from .errors import (
    DigitBudgetExceeded,
    FormatError,
    InfeasibleEntropy,
    VerificationFailure,
)
from .lattice import DiagonalScale
from .rigor import (
    DEFAULT_DIGIT_BUDGET,
    Bounds,
    Magnitude,
    decide,
    exp_arg_check,
    hull,
    iv_fraction,
    iv_log_factorial,
    iv_log_int,
    least_multiple_exceeding,
    magnitude_mul,
    snapshot,
)

__all__ = [
    "PrimeSequences",
    "prime_sequences",
    "exact_entropy",
    "lambda_lower_bound",
    "choose_M",
    "choose_N",
    "choose_q",
    "Certificate",
    "ConstructionPlan",
    "make_plan",
    "verify_plan",
    "assemble_scale",
    "divisibility_witness",
    "serialize_plan",
    "parse_plan",
]

_LN10 = math.log(10)


def _factorial_digits(m: int) -> float:
    """Decimal digit count of ``m!``, approximately (for budget gates)."""
    if m < 2:
        return 1.0
    if m.bit_length() > 1000:
        return math.inf
    return math.lgamma(m + 1) / _LN10 + 1


def _le_bounds(a: Bounds, b: Bounds) -> bool:
    """Certified ``a <= b`` as reals: every point of a below every point of b.

    Endpoint mpfs compare exactly, so this stays cheap for enclosures
    whose binary exponents are themselves astronomical.
    """
    return a.hi.as_mpf() <= b.lo.as_mpf()


def _lt_bounds(a: Bounds, b: Bounds) -> bool:
    """Certified strict ``a < b``."""
    return a.hi.as_mpf() < b.lo.as_mpf()


# ---------------------------------------------------------------------------
# Seed sequences and the entropy window
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrimeSequences:
    """The seed sequences ``p'_n, q'_n`` and their per-level rates.

    ``p[0] = 1``, ``q[0] = k``; then ``p`` multiplies up by the previous
    ``q`` while ``q`` takes the factorial of its predecessor less one.
    ``rates[n]`` encloses ``log(q[n]) / p[n]``, a strictly decreasing
    sequence whose limit is the entropy ceiling of the alphabet.
    """

    k: int
    p: tuple
    q: tuple
    rates: tuple

    @property
    def pairs(self) -> tuple:
        return tuple(zip(self.p, self.q))


def prime_sequences(
    k: int,
    n_max: int,
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
    prec: Optional[int] = None,
) -> PrimeSequences:
    """Seed sequences of the alphabet up to index ``n_max``, held exactly."""
    if k < 5:
        raise ValueError(f"seed sequences start at alphabet 5, got {k}")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    p = [1]
    q = [k]
    for n in range(n_max):
        m = q[-1] - 1
        if _factorial_digits(m) > digit_budget:
            raise DigitBudgetExceeded(
                f"q'_{n + 1} = ({q[-1]} - 1)! needs about "
                f"{_factorial_digits(m):.3g} digits (budget {digit_budget})"
            )
        p.append(p[-1] * q[-1])
        q.append(math.factorial(m))
    rates = tuple(
        snapshot(lambda qn=qn, pn=pn: iv_log_int(qn) / iv.mpf(pn), prec)
        for pn, qn in zip(p, q)
    )
    return PrimeSequences(k, tuple(p), tuple(q), rates)


def lambda_lower_bound(
    k: int,
    iterations: int = 2,
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
    prec: Optional[int] = None,
) -> Bounds:
    """Certified lower bound for the entropy ceiling of the alphabet.

    Follows the seed recursion the given number of times and closes with
    the crude floor ``(log q'_i - 5) / p'_i`` at the deepest reached
    index.  When the next factorial would leave the digit budget, one
    final step still goes through (its log has a two-sided Stirling
    enclosure) and the best bound obtained so far is returned — never an
    error.
    """
    if k < 2:
        raise ValueError(f"alphabet needs at least two letters, got {k}")
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    p, q = 1, k
    for _ in range(iterations):
        m = q - 1
        if _factorial_digits(m) > digit_budget:
            return snapshot(
                lambda: (iv_log_factorial(m) - 5) / iv.mpf(p * q), prec
            )
        p, q = p * q, math.factorial(m)
    return snapshot(lambda: (iv_log_int(q) - 5) / iv.mpf(p), prec)


def choose_M(d: int, prec: Optional[int] = None) -> int:
    """Least ``M >= 4`` with ``xi - (d+1) log(xi) - 1 >= 0`` for all xi >= M.

    The left side decreases until ``xi = d + 1`` and increases forever
    after, so checking the candidate itself (once past ``d + 1``)
    settles the whole tail.
    """
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    M = max(4, d + 1)
    while True:

        def attempt(prec_bits: int, M: int = M):
            x = iv.mpf(M)
            val = Bounds.from_iv(x - (d + 1) * iv.log(x) - 1)
            if val.entirely_ge(0):
                return 1
            if val.entirely_lt(0):
                return -1
            return None

        if decide(attempt, start=prec, what=f"sign at xi={M}") > 0:
            return M
        M += 1


def exact_entropy(h) -> Fraction:
    """Entropy targets are exact rationals; floats are refused loudly."""
    if isinstance(h, float):
        raise TypeError(
            "entropy target must be an exact rational (Fraction, int or "
            "string), not float"
        )
    return Fraction(h)


def choose_N(
    k: int,
    d: int,
    h,
    M: int,
    iterations: int = 2,
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
    prec: Optional[int] = None,
) -> int:
    """Least switch level compatible with the entropy target.

    Requires ``p'_{N-1} h >= 1``, ``q'_{N-1} >= M`` and a certified gap
    ``(d log M + 3) / p'_N < L - h`` against the certified entropy floor
    ``L``.  All three conditions only improve with ``N``, so the scan
    stops at the first success.
    """
    h = exact_entropy(h)
    window = lambda_lower_bound(k, iterations, digit_budget, prec)
    floor = window.lo_fraction()
    if h >= floor:
        raise InfeasibleEntropy(
            f"entropy {h} is not below the certified attainable floor "
            f"{float(floor):.6g} (alphabet {k}, {iterations} refinement "
            "iterations); a larger alphabet, more iterations or a larger "
            "digit budget may certify it"
        )
    margin = floor - h
    p, q = 1, k  # p'_{N-1}, q'_{N-1} for the N under test
    N = 1
    while True:
        if p * h >= 1 and q >= M:

            def attempt(prec_bits: int, p_next: int = p * q):
                lhs = Bounds.from_iv(
                    (iv.mpf(d) * iv_log_int(M) + 3) / iv.mpf(p_next)
                )
                if lhs.entirely_lt(margin):
                    return 1
                if lhs.entirely_ge(margin):
                    return -1
                return None

            if decide(attempt, start=prec, what=f"gap condition at N={N}") > 0:
                return N
        m = q - 1
        if _factorial_digits(m) > digit_budget:
            raise DigitBudgetExceeded(
                f"no admissible switch level within the digit budget "
                f"{digit_budget} (reached N={N})"
            )
        p, q = p * q, math.factorial(m)
        N += 1


# ---------------------------------------------------------------------------
# Block counts per level
# ---------------------------------------------------------------------------


def _threshold_iv(p: Magnitude, h: Fraction):
    """Enclosure of the growth threshold ``p h + 3`` at the ambient precision."""
    if p.is_exact:
        return iv_fraction(p.value * h + 3)
    arg = p.log_bounds.to_iv()
    exp_arg_check(arg)
    return iv.exp(arg) * iv_fraction(h) + 3


def _least_block_count(
    c: int,
    p: Magnitude,
    h: Fraction,
    level: int,
    digit_budget: int,
    prec: Optional[int] = None,
) -> Magnitude:
    """Smallest multiple of ``c`` whose log clears the growth threshold.

    Exact while the digit budget allows; beyond it, a log-enclosure
    ``[threshold, threshold + log c]`` (the least multiple lies within a
    factor ``c`` of the threshold's exponential).
    """
    if p.is_exact:
        threshold = p.value * h + 3
        try:
            return Magnitude.from_int(
                least_multiple_exceeding(c, threshold, digit_budget), prec
            )
        except DigitBudgetExceeded:
            pass
    bounds = snapshot(
        lambda: hull(
            _threshold_iv(p, h), _threshold_iv(p, h) + iv_log_int(c)
        ),
        prec,
    )
    return Magnitude(
        None,
        bounds,
        note=f"least multiple of {c} above the level-{level} growth threshold",
    )


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    """One verified plan condition with its decisive quantities."""

    level: int
    name: str
    passed: bool
    detail: str

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"[{status}] level {self.level} ({self.name}): {self.detail}"


@dataclass(frozen=True)
class ConstructionPlan:
    """Full parameter set of one realization, certificates included.

    ``q[n]`` counts the distinct level-n patterns, ``p[n]`` the cells of
    the level-n box; both stay exact integers while they fit the digit
    budget and carry log-enclosures beyond.  The leading exact entries
    of ``q`` yield the materializable scale rows.
    """

    k: int
    d: int
    h: Fraction
    M: int
    N: int
    iterations: int
    digit_budget: int
    window: Bounds
    q: tuple
    p: tuple
    certificates: tuple = ()

    @property
    def depth(self) -> int:
        """Highest planned level index."""
        return len(self.q) - 1

    @property
    def exact_levels(self) -> int:
        """Count of leading exact block counts (= materializable rows)."""
        n = 0
        while n < len(self.q) and self.q[n].is_exact:
            n += 1
        return n

    def level_kind(self, n: int) -> str:
        if not 0 <= n <= self.depth:
            raise ValueError(f"level {n} outside [0, {self.depth}]")
        if n == 0:
            return "alphabet"
        return "seed" if n < self.N else "growth"


def choose_q(plan: ConstructionPlan, l: int) -> Magnitude:
    """Recompute the level ``N + l`` block count from the plan's data.

    Returns the smallest multiple of ``(M+l)^d`` whose log clears the
    level's growth threshold — exactly the value the plan stores, so a
    mismatch flags a tampered or corrupted plan file.
    """
    if l < 0:
        raise ValueError("level offset must be non-negative")
    n = plan.N + l
    if n > plan.depth:
        raise ValueError(f"level {n} beyond planned depth {plan.depth}")
    return _least_block_count(
        (plan.M + l) ** plan.d, plan.p[n], plan.h, n, plan.digit_budget
    )


def make_plan(
    k: int,
    d: int,
    h,
    depth: Optional[int] = None,
    iterations: int = 2,
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
    prec: Optional[int] = None,
) -> ConstructionPlan:
    """Plan a realization of entropy ``h`` over ``k`` letters in rank ``d``.

    Orchestrates the whole parameter cascade and certifies every level;
    a failed certificate aborts the construction.  ``depth`` is the
    highest planned level.  The default reaches two levels past the
    switch level but stops earlier, without complaint, where the
    certificates stop being decidable (certification needs an exact
    cell or block count on the previous level); an explicit ``depth``
    beyond that point raises instead.
    """
    if k < 5:
        raise ValueError(
            f"direct planning needs at least 5 letters, got {k} "
            "(small alphabets go through the substitution pipeline)"
        )
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    h = exact_entropy(h)
    if h <= 0:
        raise InfeasibleEntropy(f"entropy target must be positive, got {h}")
    M = choose_M(d, prec)
    window = lambda_lower_bound(k, iterations, digit_budget, prec)
    N = choose_N(k, d, h, M, iterations, digit_budget, prec)
    requested = depth
    if depth is None:
        depth = N + 2
    if depth < N:
        raise ValueError(f"depth {depth} does not reach the switch level {N}")
    seeds = prime_sequences(k, N - 1, digit_budget, prec)
    q = [Magnitude.from_int(v, prec) for v in seeds.q]
    p = [Magnitude.from_int(v, prec) for v in seeds.p]
    for n in range(N, depth + 1):
        if not (q[-1].is_exact or p[-1].is_exact):
            if requested is not None:
                raise DigitBudgetExceeded(
                    f"level {n} is beyond certifiable reach: neither "
                    f"q[{n - 1}] nor p[{n - 1}] is exact under digit "
                    f"budget {digit_budget}"
                )
            break
        try:
            p_n = magnitude_mul(p[-1], q[-1], digit_budget, prec)
            q_n = _least_block_count(
                (M + n - N) ** d, p_n, h, n, digit_budget, prec
            )
        except DigitBudgetExceeded:
            if requested is not None or n == N:
                raise
            break
        p.append(p_n)
        q.append(q_n)
    plan = ConstructionPlan(
        k=k,
        d=d,
        h=h,
        M=M,
        N=N,
        iterations=iterations,
        digit_budget=digit_budget,
        window=window,
        q=tuple(q),
        p=tuple(p),
    )
    certificates = verify_plan(plan, prec)
    bad = [c for c in certificates if not c.passed]
    if bad:
        raise VerificationFailure(
            "plan certification failed:\n" + "\n".join(str(c) for c in bad)
        )
    return replace(plan, certificates=certificates)


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------


def _cert(
    level: int, name: str, passed: Optional[bool], detail: str
) -> Certificate:
    if passed is None:
        detail = f"undecidable from the stored enclosures; {detail}"
        passed = False
    return Certificate(level, name, bool(passed), detail)


def _factorial_dominates(
    plan: ConstructionPlan, n: int, shift: int, prec: Optional[int]
) -> Optional[bool]:
    """Whether ``q_n <= (q_{n-1} - shift)!`` holds, decided rigorously.

    When the predecessor is known only through its log, the two sides
    are correlated (the level-n threshold is built from the same unknown
    integer), so both are treated as functions of one variable ``x`` and
    compared at the certified floor ``x0 <= q_{n-1}``: the gap
    ``(x - shift)(log(x - shift) - 1) - (h p_{n-1} x + 3 + log c)``
    increases in ``x`` once ``log(x0 - shift) >= h p_{n-1}``, so a check
    at ``x0`` settles the whole range.
    """
    q_prev, q_n = plan.q[n - 1], plan.q[n]
    what = f"q[{n}] vs (q[{n - 1}] - {shift})!"
    if q_prev.is_exact:
        m = q_prev.value - shift
        if m < 0:
            return False
        if q_n.is_exact:
            qv = q_n.value

            def attempt(prec_bits: int):
                lf = Bounds.from_iv(iv_log_factorial(m))
                lq = Bounds.from_iv(iv_log_int(qv))
                if _le_bounds(lq, lf):
                    return 1
                if _lt_bounds(lf, lq):
                    return -1
                return None

            return decide(attempt, start=prec, what=what) > 0

        def attempt(prec_bits: int):
            lf = Bounds.from_iv(iv_log_factorial(m))
            if _le_bounds(q_n.log_bounds, lf):
                return 1
            if _lt_bounds(lf, q_n.log_bounds):
                return -1
            return None

        return decide(attempt, start=prec, what=what) > 0
    p_prev = plan.p[n - 1]
    if not p_prev.is_exact or n - 1 < plan.N:
        return None
    # the floor x0 <= q_{n-1} comes from the predecessor's own defining
    # threshold, recomputed from the exact cell count at ladder precision
    # (the stored enclosure is far too wide in absolute terms out here)
    slope = p_prev.value * plan.h
    t_prev = slope + 3
    c = (plan.M + n - plan.N) ** plan.d

    def attempt(prec_bits: int):
        t_iv = iv_fraction(t_prev)
        exp_arg_check(t_iv)
        x0 = iv.mpf(Bounds.from_iv(iv.exp(t_iv)).lo.as_mpf())
        xm = x0 - shift
        if not Bounds.from_iv(xm).lo.as_mpf() > 1:
            return None
        sl = iv_fraction(slope)
        monotone = Bounds.from_iv(iv.log(xm) - sl)
        gap = Bounds.from_iv(
            xm * (iv.log(xm) - 1) - (sl * x0 + 3 + iv_log_int(c))
        )
        if monotone.lo.as_mpf() >= 0 and gap.lo.as_mpf() >= 0:
            return 1
        if gap.hi.as_mpf() < 0 and monotone.lo.as_mpf() >= 0:
            return -1
        return None

    return decide(attempt, start=prec, what=what) > 0


def _bracket_certificate(
    plan: ConstructionPlan, n: int, M_l: int, prec: Optional[int]
) -> Certificate:
    """Growth bracket: ``p_n h + 3 <= log q_n <= p_n h + d log(M+l) + 3``."""
    q_n, p_n, h, d = plan.q[n], plan.p[n], plan.h, plan.d
    detail = f"p[{n}] h + 3 <= log q[{n}] <= p[{n}] h + {d} log({M_l}) + 3"
    if q_n.is_exact:
        qv = q_n.value

        def attempt(prec_bits: int):
            lq = Bounds.from_iv(iv_log_int(qv))
            lo = Bounds.from_iv(_threshold_iv(p_n, h))
            hi = Bounds.from_iv(
                _threshold_iv(p_n, h) + iv.mpf(d) * iv_log_int(M_l)
            )
            if _le_bounds(lo, lq) and _le_bounds(lq, hi):
                return 1
            if _lt_bounds(lq, lo) or _lt_bounds(hi, lq):
                return -1
            return None

        ok = decide(attempt, start=prec, what=f"growth bracket at {n}") > 0
        return _cert(n, "bracket", ok, detail)
    # symbolic level: the bracket holds by construction of the least
    # multiple provided the threshold dominates log c; check that, and
    # that the stored enclosure sits inside the certified outer bracket
    lo_b = snapshot(lambda: _threshold_iv(p_n, h), prec)
    hi_b = snapshot(
        lambda: _threshold_iv(p_n, h) + iv.mpf(d) * iv_log_int(M_l), prec
    )
    c = M_l ** d
    dominated = snapshot(lambda: _threshold_iv(p_n, h) - iv_log_int(c), prec)
    ok = (
        dominated.lo.as_mpf() > 0
        and q_n.log_bounds.lo.as_mpf() >= lo_b.lo.as_mpf()
        and q_n.log_bounds.hi.as_mpf() <= hi_b.hi.as_mpf()
    )
    return _cert(
        n, "bracket", ok, detail + " (by construction; enclosure contained)"
    )


def _growth_certificates(
    plan: ConstructionPlan, l: int, prec: Optional[int] = None
) -> list:
    """The per-level conditions of a growth level ``n = N + l``."""
    n = plan.N + l
    M_l = plan.M + l
    c = M_l ** plan.d
    q_prev, q_n = plan.q[n - 1], plan.q[n]
    out = []

    # block counts strictly increase
    if q_prev.is_exact and q_n.is_exact:
        grows = q_prev.value < q_n.value
    else:
        grows = _lt_bounds(q_prev.log_bounds, q_n.log_bounds) or None
    out.append(
        _cert(
            n,
            "growth",
            grows,
            f"q[{n - 1}] = {q_prev.describe()} < q[{n}] = {q_n.describe()}",
        )
    )

    # never more blocks than the arrangements that can express them
    out.append(
        _cert(
            n,
            "arrangements",
            _factorial_dominates(plan, n, 1, prec),
            f"q[{n}] = {q_n.describe()} <= (q[{n - 1}] - 1)!",
        )
    )

    # the growth bracket that pins the entropy
    out.append(_bracket_certificate(plan, n, M_l, prec))

    # divisibility that keeps the scale rows integral
    if q_n.is_exact:
        ok = q_n.value % c == 0
        detail = f"{c} divides q[{n}] = {q_n.describe()}"
    else:
        ok = True
        detail = f"q[{n}] is a multiple of {c} by construction"
    out.append(_cert(n, "divisibility", ok, detail))

    # room for the next level's spread across axes
    if q_n.is_exact:
        ok = M_l + 1 <= q_n.value
    else:
        ok = _le_bounds(
            snapshot(lambda: iv_log_int(M_l + 1), prec), q_n.log_bounds
        )
    out.append(_cert(n, "headroom", ok, f"{M_l + 1} <= q[{n}]"))

    # the level family is long enough to hold q_n members
    out.append(
        _cert(
            n,
            "capacity",
            _factorial_dominates(plan, n, 2, prec),
            f"q[{n}] = {q_n.describe()} <= (q[{n - 1}] - 2)!, within the "
            "member count of the level family",
        )
    )

    # enough members that every rank/letter pair is realized away from
    # the order-preserving member (witness steering)
    if q_prev.is_exact and q_n.is_exact:
        ok = q_n.value >= q_prev.value + 4
    else:
        shifted = snapshot(lambda: q_prev.log_bounds.to_iv() + 1, prec)
        ok = _le_bounds(shifted, q_n.log_bounds)
    out.append(_cert(n, "steering", ok, f"q[{n}] >= q[{n - 1}] + 4"))
    return out


def verify_plan(plan: ConstructionPlan, prec: Optional[int] = None) -> tuple:
    """Re-derive every certificate from the plan's stored values.

    Exact levels replay bit-for-bit; symbolic levels are re-derived at
    the same working precision, so a tampered plan file fails here
    before anything gets evaluated.
    """
    out = []
    seeds = prime_sequences(plan.k, plan.N - 1, plan.digit_budget, prec)
    for n in range(plan.N):
        good = (
            plan.q[n].is_exact
            and plan.q[n].value == seeds.q[n]
            and plan.p[n].is_exact
            and plan.p[n].value == seeds.p[n]
        )
        out.append(
            _cert(
                n,
                "seed",
                good,
                f"(p[{n}], q[{n}]) replays the alphabet recursion: "
                f"({seeds.p[n]}, {seeds.q[n]})",
            )
        )
    for l in range(plan.depth - plan.N + 1):
        n = plan.N + l
        # the cell count must replay the product recursion
        redo_p = magnitude_mul(
            plan.p[n - 1], plan.q[n - 1], plan.digit_budget, prec
        )
        if plan.p[n].is_exact or redo_p.is_exact:
            same_p = (
                plan.p[n].is_exact
                and redo_p.is_exact
                and plan.p[n].value == redo_p.value
            )
        else:
            same_p = plan.p[n].log_bounds == redo_p.log_bounds
        out.append(
            _cert(n, "cells", same_p, f"p[{n}] replays p[{n - 1}] * q[{n - 1}]")
        )
        # the block count must replay the least-multiple derivation
        redo = choose_q(plan, l)
        if plan.q[n].is_exact or redo.is_exact:
            same = (
                plan.q[n].is_exact
                and redo.is_exact
                and plan.q[n].value == redo.value
            )
            detail = (
                f"stored q[{n}] = {plan.q[n].describe()} is the least "
                "admissible multiple"
            )
        else:
            same = plan.q[n].log_bounds == redo.log_bounds
            detail = (
                f"stored enclosure of q[{n}] replays the threshold derivation"
            )
        out.append(_cert(n, "choice", same, detail))
        out.extend(_growth_certificates(plan, l, prec))
    return tuple(out)


# ---------------------------------------------------------------------------
# Scale assembly
# ---------------------------------------------------------------------------


def assemble_scale(plan: ConstructionPlan) -> DiagonalScale:
    """Diagonal refinement rows over the plan's exact levels.

    Row 0 concentrates the alphabet on the first axis; seed rows stay on
    that axis; growth rows spread ``M+l`` over the other axes with the
    first axis absorbing the cofactor ``q_n / (M+l)^(d-1)``.
    """
    rows = []
    for n in range(plan.exact_levels):
        q_n = plan.q[n].value
        if n < plan.N:
            rows.append((q_n,) + (1,) * (plan.d - 1))
            continue
        M_l = plan.M + n - plan.N
        head, rem = divmod(q_n, M_l ** (plan.d - 1))
        if rem:
            raise VerificationFailure(
                f"level-{n} block count {q_n} is not divisible by "
                f"{M_l}^{plan.d - 1} despite its divisibility certificate"
            )
        row = (head,) + (M_l,) * (plan.d - 1)
        if min(row) < 4:
            raise VerificationFailure(
                f"level-{n} refinement row {row} has an entry below 4"
            )
        rows.append(row)
    return DiagonalScale(tuple(rows))


def divisibility_witness(
    plan: ConstructionPlan, m: int, i: int
) -> Optional[int]:
    """Least planned level whose axis-``i`` box period is divisible by ``m``.

    Exact rows contribute their full entry; symbolic growth rows still
    contribute the certified factor ``M + l`` on every axis (the first
    axis cofactor keeps one such factor by the divisibility condition).
    ``None`` means divisibility by ``m`` is not certified at the planned
    depth — a deeper plan may still certify it.
    """
    if m < 1:
        raise ValueError("modulus must be positive")
    if not 1 <= i <= plan.d:
        raise ValueError(f"axis {i} outside [1, {plan.d}]")
    scale = assemble_scale(plan)
    known = 1
    for level in range(plan.depth + 1):
        if level < plan.exact_levels:
            known *= scale.steps[level][i - 1]
        elif level >= plan.N:
            known *= plan.M + level - plan.N
        else:
            return None
        if known % m == 0:
            return level + 1
    return None


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_PLAN_HEADER = "toeplitz-forge-plan v1"


def serialize_plan(plan: ConstructionPlan) -> str:
    """Deterministic key-value rendering (round-trips byte-identically)."""
    lines = [
        _PLAN_HEADER,
        f"k {plan.k}",
        f"d {plan.d}",
        f"h {plan.h}",
        f"M {plan.M}",
        f"N {plan.N}",
        f"iterations {plan.iterations}",
        f"digit-budget {plan.digit_budget}",
        f"window {plan.window}",
        f"depth {plan.depth}",
    ]
    for label, seq in (("q", plan.q), ("p", plan.p)):
        for n, mag in enumerate(seq):
            if mag.is_exact:
                lines.append(f"{label}{n} exact {mag.value}")
            else:
                lines.append(f"{label}{n} log {mag.log_bounds} | {mag.note}")
    return "\n".join(lines) + "\n"


def parse_plan(text: str) -> ConstructionPlan:
    """Inverse of :func:`serialize_plan`; certificates are not restored.

    Callers re-certify with :func:`verify_plan`, which is what catches a
    tampered value before anything is evaluated.
    """
    lines = text.splitlines()
    if not lines or lines[0] != _PLAN_HEADER:
        raise FormatError("not a plan file (missing header line)")
    fields = {}
    series = {"q": {}, "p": {}}
    for raw in lines[1:]:
        if not raw.strip():
            continue
        key, _, rest = raw.partition(" ")
        if key and key[0] in series and key[1:].isdigit():
            label, n = key[0], int(key[1:])
            kind, _, value = rest.partition(" ")
            if kind == "exact":
                series[label][n] = Magnitude.from_int(int(value))
            elif kind == "log":
                bounds_txt, sep, note = value.partition(" | ")
                if not sep:
                    raise FormatError(f"malformed symbolic entry: {raw!r}")
                series[label][n] = Magnitude(
                    None, Bounds.parse(bounds_txt), note=note
                )
            else:
                raise FormatError(f"unknown magnitude kind in {raw!r}")
        else:
            fields[key] = rest
    try:
        depth = int(fields["depth"])
        plan = ConstructionPlan(
            k=int(fields["k"]),
            d=int(fields["d"]),
            h=Fraction(fields["h"]),
            M=int(fields["M"]),
            N=int(fields["N"]),
            iterations=int(fields["iterations"]),
            digit_budget=int(fields["digit-budget"]),
            window=Bounds.parse(fields["window"]),
            q=tuple(series["q"][n] for n in range(depth + 1)),
            p=tuple(series["p"][n] for n in range(depth + 1)),
        )
    except KeyError as exc:
        raise FormatError(f"plan file misses field {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"malformed plan value: {exc}") from exc
    return plan
