"""Exception types shared across the package.

The CLI maps these onto exit codes: input problems exit with 2, solver
non-convergence with 3.
"""

from __future__ import annotations


class AqcGapError(Exception):
    """Base class for all package errors."""


class InputError(AqcGapError, ValueError):
    """Malformed graph, parameter or file content."""


class CouplingConditionError(InputError):
    """An edge coupling does not exceed the smaller endpoint weight."""

    def __init__(self, violations):
        self.violations = list(violations)
        shown = ", ".join(f"({u},{v}): J={j:g} <= {m:g}" for u, v, j, m in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"coupling condition J_ij > min(c_i, c_j) violated on {shown}{more}")

    def __reduce__(self):
        return type(self), (self.violations,)


class EnumerationLimitError(InputError):
    """Brute-force enumeration requested beyond the supported vertex count."""


class ConvergenceError(AqcGapError):
    """An iterative eigensolve hit its iteration cap."""

    def __init__(self, message, residuals=None, iterations=None):
        super().__init__(message)
        self.residuals = residuals
        self.iterations = iterations

    def __reduce__(self):
        return type(self), (str(self), self.residuals, self.iterations)


class DegenerateGapError(AqcGapError):
    """The two lowest levels coincide where a resolved gap was required."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval

    def __reduce__(self):
        return type(self), (str(self), self.interval)
