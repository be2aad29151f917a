"""Exception types shared across the toolkit."""

from __future__ import annotations


class FeasibilityError(ValueError):
    """Budget too small to keep up with the offered load."""

    def __init__(self, message: str, *, required: float | None = None, budget: float | None = None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class TraceParseError(ValueError):
    """Malformed trace file; message carries line number and field."""


class PlanCoverageError(ValueError):
    """A width plan does not cover every (class, epoch) of the workload."""

    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__(f"plan is missing widths for (class, epoch) pairs: {', '.join(map(str, self.missing))}")
