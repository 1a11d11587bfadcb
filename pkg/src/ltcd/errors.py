"""Exception types and the shared enumeration budget."""

from __future__ import annotations

import os

DEFAULT_BUDGET = 2**22
BUDGET_ENV = "LTCD_BUDGET"


class LtcdError(Exception):
    """Base class for library errors."""


class MalformedCircuit(LtcdError, ValueError):
    pass


class BudgetExceeded(LtcdError):
    def __init__(self, needed: int, budget: int, what: str = "enumeration"):
        super().__init__(f"{what} needs {needed} evaluations, budget is {budget}")
        self.needed = needed
        self.budget = budget


class ParameterInfeasible(LtcdError, ValueError):
    """Raised when a parameter combination admits no valid instance."""


class StageFailure(LtcdError):
    """A restriction stage hit its failure event. Carries the partial trace."""

    def __init__(self, stage: str, condition: str, trace=None):
        super().__init__(f"stage {stage} failed: {condition}")
        self.stage = stage
        self.condition = condition
        self.trace = trace


class NoSuccessfulSeed(LtcdError):
    pass


def parse_budget(raw: str) -> int:
    """Accept plain integers and powers written as 2^k or 2**k."""
    raw = raw.strip()
    for prefix in ("2**", "2^"):
        if raw.startswith(prefix):
            return 2 ** int(raw[len(prefix) :])
    return int(raw)


def default_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    if raw is None or not raw.strip():
        return DEFAULT_BUDGET
    return parse_budget(raw)


def resolve_budget(budget: int | None) -> int:
    return default_budget() if budget is None else int(budget)


def charge(needed: int, budget: int | None, what: str = "enumeration") -> int:
    """Raise BudgetExceeded unless `needed` fits; returns the resolved budget."""
    limit = resolve_budget(budget)
    if needed > limit:
        raise BudgetExceeded(needed, limit, what)
    return limit
