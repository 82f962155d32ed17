"""Exception hierarchy shared by every layer of the package.

Each exception carries enough structured context to be reported by the
command line front end, which maps exception classes to process exit
codes (see :data:`EXIT_CODES`).
"""

from __future__ import annotations


class ToeplitzForgeError(Exception):
    """Base class for all package-specific errors."""


class InfeasibleEntropy(ToeplitzForgeError):
    """Requested entropy cannot be certified against the available lower bound.

    Raised by the parameter planner when the target entropy ``h`` is not
    strictly below the certified lower bound for the chosen alphabet, or
    when no admissible starting level exists.  The message always states
    the certified bound so a caller can tell whether more bound
    iterations could help.
    """


class DepthBudgetExceeded(ToeplitzForgeError):
    """A pointwise evaluation needed more construction levels than allowed.

    Carries the coordinate and the budget, because the typical remedy is
    either enlarging the budget or restricting the query window to cells
    resolved by the levels that are exactly representable.
    """

    def __init__(self, message: str, *, point=None, budget=None):
        super().__init__(message)
        self.point = point
        self.budget = budget


class DigitBudgetExceeded(ToeplitzForgeError):
    """An exact integer (or an exponent) outgrew the configured digit cap."""


class CellBudgetExceeded(ToeplitzForgeError):
    """A materialization would touch more lattice cells than permitted."""


class PrecisionExhausted(ToeplitzForgeError):
    """Interval arithmetic could not settle a comparison below the precision cap."""


class VerificationFailure(ToeplitzForgeError):
    """A requested certificate or cross-check did not hold.

    This is reserved for genuine refutations (a formula disagreeing with
    a brute-force recount, a failed witness), never for budget or
    representability limits.
    """


class FormatError(ToeplitzForgeError):
    """Malformed input: plan text, patch file, box syntax, or CLI value."""


#: Process exit codes used by the command line front end.
EXIT_CODES = {
    InfeasibleEntropy: 2,
    DepthBudgetExceeded: 3,
    DigitBudgetExceeded: 3,
    CellBudgetExceeded: 3,
    PrecisionExhausted: 3,
    VerificationFailure: 4,
    FormatError: 5,
}


def exit_code_for(exc: BaseException) -> int:
    """Exit code for ``exc``: specific codes above, 1 for anything else."""
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1
