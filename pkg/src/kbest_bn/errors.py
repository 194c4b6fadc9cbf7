"""Shared exception types."""
from __future__ import annotations


class DatasetError(ValueError):
    """Raised when input data fails to parse or validate."""


class SchemaMismatchError(DatasetError):
    """Raised when two datasets disagree on variable names."""


class MemoryBudgetError(RuntimeError):
    """Raised when an operation's estimated memory exceeds the configured budget.

    Carries a size report so callers can print a machine-readable refusal.
    """

    def __init__(self, what: str, required_bytes: int, budget_bytes: int):
        self.what = what
        self.required_bytes = required_bytes
        self.budget_bytes = budget_bytes
        super().__init__(
            f"{what} needs an estimated {required_bytes} bytes "
            f"but the memory budget is {budget_bytes} bytes"
        )


class OracleSizeError(RuntimeError):
    """Raised when an exhaustive-enumeration request is too large to honor."""

    def __init__(self, n: int, limit: int, estimated_dags: int):
        self.n = n
        self.limit = limit
        self.estimated_dags = estimated_dags
        super().__init__(
            f"exhaustive enumeration supports at most {limit} variables; "
            f"n={n} would require visiting about {estimated_dags:.3g} DAGs"
        )
