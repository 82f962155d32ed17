"""Rigorous numeric layer: outward-rounded intervals and exact/symbolic integers.

Every inequality that a plan certifies is decided here, and only here,
through interval arithmetic with directed rounding (``mpmath.iv``).  A
comparison is accepted only when the two interval operands are disjoint;
otherwise the working precision is doubled and the quantities are
recomputed, up to a hard cap.  Nothing in this module ever rounds to
nearest.

Two storage types are exposed:

``Bounds``
    A closed interval with exact dyadic endpoints (``man * 2**exp``).
    Endpoints survive text round-trips losslessly, which keeps rendered
    plans byte-stable.

``Magnitude``
    A positive integer that is either held exactly or represented by a
    rigorous enclosure of its natural logarithm.  Scale parameters keep
    exact values while they fit the digit budget and degrade to
    log-enclosures beyond it.
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import mpmath
from mpmath import iv
from mpmath import libmp

from .errors import DigitBudgetExceeded, PrecisionExhausted

__all__ = [
    "DEFAULT_PRECISION",
    "PRECISION_CAP",
    "PRECISION_ENV",
    "DEFAULT_DIGIT_BUDGET",
    "Bounds",
    "Dyad",
    "Magnitude",
    "working_precision",
    "decide",
    "iv_fraction",
    "hull",
    "snapshot",
    "log_of_int",
    "log_factorial",
    "iv_log_int",
    "iv_log_factorial",
    "exp_arg_check",
    "least_multiple_exceeding",
]

#: Working precision (bits) used when the environment does not override it.
DEFAULT_PRECISION = 128

#: Environment variable consulted for the working precision.
PRECISION_ENV = "TOEPLITZ_FORGE_PRECISION"

#: Hard cap for the precision-doubling ladder.
PRECISION_CAP = 1 << 14

#: Default cap on decimal digits of exact integers kept by planners.
DEFAULT_DIGIT_BUDGET = 10 ** 6

# Largest admissible log2-magnitude for an argument passed to iv.exp.
# The result's binary exponent is about arg/log(2); keeping the argument
# below 2**_EXP_ARG_LOG2_CAP keeps that exponent integer to ~1e6 decimal
# digits, which is the same order as the digit budget.
_EXP_ARG_LOG2_CAP = 3_400_000

_LOG10_2 = math.log10(2)


def working_precision() -> int:
    """Working precision in bits (env override via TOEPLITZ_FORGE_PRECISION)."""
    raw = os.environ.get(PRECISION_ENV)
    if raw is None:
        return DEFAULT_PRECISION
    try:
        prec = int(raw)
    except ValueError as exc:
        raise ValueError(
            f"{PRECISION_ENV} must be an integer number of bits, got {raw!r}"
        ) from exc
    if prec < 16 or prec > PRECISION_CAP:
        raise ValueError(
            f"{PRECISION_ENV} must lie in [16, {PRECISION_CAP}], got {prec}"
        )
    return prec


@contextmanager
def _iv_precision(prec: int):
    """Temporarily set the interval context's precision."""
    saved = iv.prec
    iv.prec = prec
    try:
        yield
    finally:
        iv.prec = saved


# ---------------------------------------------------------------------------
# Dyadic endpoints
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=False)
class Dyad:
    """Exact dyadic rational ``man * 2**exp`` (an interval endpoint)."""

    man: int
    exp: int

    def as_fraction(self) -> Fraction:
        if self.exp >= 0:
            return Fraction(self.man * (1 << self.exp))
        return Fraction(self.man, 1 << (-self.exp))

    def as_mpf(self):
        """Exact mpf carrying this value (no rounding)."""
        return mpmath.mp.make_mpf(libmp.from_man_exp(self.man, self.exp))

    def log2_magnitude(self) -> int:
        """Upper bound on log2(|value|); minimal for zero."""
        if self.man == 0:
            return -(1 << 62)
        return self.man.bit_length() + self.exp

    def __str__(self) -> str:
        return f"{self.man}*2^{self.exp}"

    @classmethod
    def parse(cls, text: str) -> "Dyad":
        man_s, _, exp_s = text.partition("*2^")
        if not _:
            raise ValueError(f"not a dyadic literal: {text!r}")
        return cls(int(man_s), int(exp_s))

    @classmethod
    def from_raw_mpf(cls, raw) -> "Dyad":
        """Convert a libmp mpf tuple to a Dyad; rejects inf/nan."""
        if raw == libmp.fzero:
            return cls(0, 0)
        sign, man, exp, _bc = raw
        if man == 0:
            raise ValueError("non-finite interval endpoint")
        man = int(man)
        return cls(-man if sign else man, exp)


@dataclass(frozen=True)
class Bounds:
    """Closed interval [lo, hi] with exact dyadic endpoints."""

    lo: Dyad
    hi: Dyad

    def __post_init__(self):
        # mpf comparison is exact and stays cheap even when the dyadic
        # exponents are astronomically large (as_fraction would not)
        if self.lo.as_mpf() > self.hi.as_mpf():
            raise ValueError(f"inverted bounds: {self}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_iv(cls, x) -> "Bounds":
        lo_raw, hi_raw = x._mpi_
        return cls(Dyad.from_raw_mpf(lo_raw), Dyad.from_raw_mpf(hi_raw))

    @classmethod
    def exact(cls, q: Fraction | int) -> "Bounds":
        """Exact bounds for a dyadic rational (den must be a power of two)."""
        q = Fraction(q)
        den = q.denominator
        e = den.bit_length() - 1
        if den != 1 << e:
            raise ValueError(f"{q} is not dyadic")
        d = Dyad(q.numerator, -e)
        return cls(d, d)

    # -- views -------------------------------------------------------------

    def lo_fraction(self) -> Fraction:
        return self.lo.as_fraction()

    def hi_fraction(self) -> Fraction:
        return self.hi.as_fraction()

    def to_iv(self, prec: Optional[int] = None):
        with _iv_precision(prec or iv.prec):
            return iv.mpf([self.lo.as_mpf(), self.hi.as_mpf()])

    def width_fraction(self) -> Fraction:
        return self.hi_fraction() - self.lo_fraction()

    def midpoint_float(self) -> float:
        mid = (self.lo.as_mpf() + self.hi.as_mpf()) / 2
        try:
            return float(mid)
        except (OverflowError, ValueError):
            return math.inf if mid > 0 else -math.inf

    # -- exact comparisons against rationals -------------------------------

    def entirely_ge(self, q: Fraction | int) -> bool:
        return self.lo_fraction() >= q

    def entirely_gt(self, q: Fraction | int) -> bool:
        return self.lo_fraction() > q

    def entirely_le(self, q: Fraction | int) -> bool:
        return self.hi_fraction() <= q

    def entirely_lt(self, q: Fraction | int) -> bool:
        return self.hi_fraction() < q

    def contains(self, q: Fraction | int) -> bool:
        return self.lo_fraction() <= q <= self.hi_fraction()

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"

    @classmethod
    def parse(cls, text: str) -> "Bounds":
        text = text.strip()
        if not (text.startswith("[") and text.endswith("]")):
            raise ValueError(f"not a bounds literal: {text!r}")
        lo_s, _, hi_s = text[1:-1].partition(",")
        return cls(Dyad.parse(lo_s.strip()), Dyad.parse(hi_s.strip()))


# ---------------------------------------------------------------------------
# Interval helpers
# ---------------------------------------------------------------------------


def iv_fraction(q: Fraction | int):
    """Enclosure of a rational under the current iv precision.

    ``iv.mpf`` does not accept Fractions; dividing two exactly converted
    integers keeps the rounding outward.
    """
    q = Fraction(q)
    if q.denominator == 1:
        return iv.mpf(q.numerator)
    return iv.mpf(q.numerator) / iv.mpf(q.denominator)


def hull(*xs):
    """Smallest interval containing all operands."""
    los = []
    his = []
    for x in xs:
        lo_raw, hi_raw = x._mpi_
        los.append(mpmath.mp.make_mpf(lo_raw))
        his.append(mpmath.mp.make_mpf(hi_raw))
    return iv.mpf([min(los), max(his)])


def snapshot(compute: Callable[[], object], prec: Optional[int] = None) -> Bounds:
    """Run ``compute`` under ``prec`` bits and freeze the result's endpoints."""
    with _iv_precision(prec or working_precision()):
        return Bounds.from_iv(compute())


def decide(
    attempt: Callable[[int], Optional[object]],
    *,
    start: Optional[int] = None,
    cap: int = PRECISION_CAP,
    what: str = "comparison",
):
    """Precision ladder: call ``attempt(prec)`` at doubling precisions.

    ``attempt`` returns ``None`` while the intervals at hand still
    overlap and a decided value otherwise.  Deterministic: the ladder is
    a pure function of the inputs.
    """
    prec = start or working_precision()
    while prec <= cap:
        with _iv_precision(prec):
            verdict = attempt(prec)
        if verdict is not None:
            return verdict
        prec *= 2
    raise PrecisionExhausted(
        f"could not settle {what} below {cap} bits of working precision"
    )


def exp_arg_check(x) -> None:
    """Reject iv.exp arguments whose result exponent would not be storable.

    The binary exponent of exp(x) is about x/log 2 and is stored as an
    exact integer; this guard keeps that integer around a million
    decimal digits at most.
    """
    hi = Bounds.from_iv(x).hi
    if hi.log2_magnitude() > _EXP_ARG_LOG2_CAP:
        raise DigitBudgetExceeded(
            "exponential argument too large to represent its result "
            f"(log2 magnitude {hi.log2_magnitude()} exceeds {_EXP_ARG_LOG2_CAP})"
        )


def iv_log_int(n: int):
    """iv.log of an exact integer under the current precision.

    Composes inside ``snapshot``/``decide`` bodies; use ``log_of_int``
    for a frozen result.
    """
    if n <= 0:
        raise ValueError(f"log of non-positive integer {n}")
    return iv.log(iv.mpf(n))


def log_of_int(n: int, prec: Optional[int] = None) -> Bounds:
    """Rigorous enclosure of log(n) for an exact positive integer."""
    return snapshot(lambda: iv_log_int(n), prec)


_STIRLING_EXACT_LIMIT = 4096


def iv_log_factorial(m: int):
    """Enclosure of log(m!) under the current iv precision.

    Small arguments go through the exact factorial; large ones use the
    two-sided Stirling enclosure
    ``log m! = m log m - m + log(2 pi m)/2 + r`` with
    ``1/(12m+1) < r < 1/(12m)``.  Composes inside ``snapshot``/``decide``
    bodies; use ``log_factorial`` for a frozen result.
    """
    if m < 0:
        raise ValueError("factorial of negative integer")
    if m <= _STIRLING_EXACT_LIMIT:
        return iv_log_int(math.factorial(m))
    m_iv = iv.mpf(m)
    s = m_iv * iv.log(m_iv) - m_iv + iv.log(2 * iv.pi * m_iv) / 2
    r = hull(iv.mpf(1) / iv.mpf(12 * m + 1), iv.mpf(1) / iv.mpf(12 * m))
    return s + r


def log_factorial(m: int, prec: Optional[int] = None) -> Bounds:
    """Rigorous enclosure of log(m!)."""
    return snapshot(lambda: iv_log_factorial(m), prec)


def least_multiple_exceeding(
    c: int, threshold: Fraction, digit_budget: int = DEFAULT_DIGIT_BUDGET
) -> int:
    """Smallest positive multiple of ``c`` whose log is >= ``threshold``.

    ``threshold`` is an exact rational, so ``exp(threshold)`` is
    irrational (for threshold != 0) and the answer is decidable at some
    finite precision.  Deciding the enclosing integer inherently costs
    about ``threshold / log 2`` bits, so the ladder cap scales with the
    threshold; the digit budget bounds that cost up front.
    """
    if c <= 0:
        raise ValueError("modulus must be positive")
    if threshold <= 0:
        return c
    # magnitude pre-check without float conversion: huge thresholds would
    # overflow float() long before they fit any digit budget
    t_mag = threshold.numerator.bit_length() - threshold.denominator.bit_length()
    if t_mag > 64:
        raise DigitBudgetExceeded(
            f"the least multiple of {c} with log >= 2^{t_mag - 1} has far "
            f"more digits than the budget {digit_budget}"
        )
    digits_needed = float(threshold) / math.log(10) + 1
    if digits_needed > digit_budget:
        raise DigitBudgetExceeded(
            f"the least multiple of {c} with log >= {float(threshold):.6g} "
            f"has about {digits_needed:.3g} digits (budget {digit_budget})"
        )

    def attempt(prec: int):
        t = iv_fraction(threshold)
        exp_arg_check(t)
        e = iv.exp(t) / iv.mpf(c)
        b = Bounds.from_iv(e)
        lo_n = -((-b.lo_fraction().numerator) // b.lo_fraction().denominator)
        hi_n = -((-b.hi_fraction().numerator) // b.hi_fraction().denominator)
        if lo_n == hi_n:
            return lo_n
        return None

    cap = max(PRECISION_CAP, int(float(threshold) * 1.5) + 1024)
    n = decide(attempt, cap=cap, what=f"ceil(exp({threshold})/{c})")
    return n * c


# ---------------------------------------------------------------------------
# Exact-or-log integers
# ---------------------------------------------------------------------------


def _digits10_of_int(n: int) -> int:
    return len(str(abs(n)))


@dataclass(frozen=True)
class Magnitude:
    """A positive integer, exact or known through a log enclosure.

    ``value`` is ``None`` exactly when the integer outgrew the digit
    budget; then ``log_bounds`` is the only handle on it.  ``note``
    records, in plain words, how the symbolic value is defined.
    """

    value: Optional[int]
    log_bounds: Bounds
    note: str = ""

    def __post_init__(self):
        if self.value is not None and self.value <= 0:
            raise ValueError("magnitudes are positive")

    @property
    def is_exact(self) -> bool:
        return self.value is not None

    @classmethod
    def from_int(cls, n: int, prec: Optional[int] = None) -> "Magnitude":
        return cls(n, log_of_int(n, prec))

    def digits10_upper(self) -> int:
        """Upper bound on the decimal digit count."""
        if self.value is not None:
            return _digits10_of_int(self.value)
        hi = self.log_bounds.hi.as_mpf()
        with mpmath.workprec(64):
            return max(1, int(mpmath.floor(hi / math.log(10))) + 2)

    def log_lower(self) -> Fraction:
        return self.log_bounds.lo_fraction()

    def log_upper(self) -> Fraction:
        return self.log_bounds.hi_fraction()

    def __str__(self) -> str:
        if self.value is not None:
            return f"exact {self.value}"
        suffix = f" ({self.note})" if self.note else ""
        return f"log-range {self.log_bounds}{suffix}"

    def describe(self, digit_limit: int = 40) -> str:
        """Short human-oriented rendering; long integers show digit counts."""
        if self.value is None:
            mid = (self.log_bounds.lo.as_mpf() + self.log_bounds.hi.as_mpf()) / 2
            return f"~exp({mpmath.nstr(mid, 6)}) [{self.note}]"
        s = str(self.value)
        if len(s) <= digit_limit:
            return s
        return f"{s[:8]}...{s[-8:]} ({len(s)} digits)"


def magnitude_mul(
    a: Magnitude, b: Magnitude, digit_budget: int = DEFAULT_DIGIT_BUDGET,
    prec: Optional[int] = None,
) -> Magnitude:
    """Product of magnitudes, degrading to log bounds past the digit budget."""
    if a.is_exact and b.is_exact:
        approx_digits = _digits10_of_int(a.value) + _digits10_of_int(b.value)
        if approx_digits <= digit_budget + 1:
            v = a.value * b.value
            if _digits10_of_int(v) <= digit_budget:
                return Magnitude.from_int(v, prec)
    # interval addition of the stored dyadic endpoints: outward-rounded
    # and cheap regardless of endpoint exponents
    bounds = snapshot(
        lambda: a.log_bounds.to_iv() + b.log_bounds.to_iv(), prec
    )
    note = " * ".join(x.note or "exact" for x in (a, b))
    return Magnitude(None, bounds, note=f"product: {note}")
