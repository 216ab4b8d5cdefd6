"""Exception types shared across the package."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for every error raised by this package."""


class ScenarioError(EngineError):
    """A scenario document failed to parse or validate.

    ``diagnostics`` holds one human-readable message per violated invariant,
    each prefixed with the field path it refers to.
    """

    def __init__(self, message: str, diagnostics: tuple[str, ...] | list[str] = ()):
        super().__init__(message)
        self.diagnostics = tuple(diagnostics)


class LpNumericalError(EngineError):
    """The solver stalled, hit a singular basis, or failed its own
    post-solve optimality certificates."""


class InfeasibleError(EngineError):
    """A clearing problem admits no feasible dispatch.

    ``stage`` names the binding requirement (for example ``"end_level"``) and
    ``interval_index`` is filled in by the orchestrator where known.
    """

    def __init__(self, message: str, stage: str = "", interval_index: int | None = None):
        super().__init__(message)
        self.stage = stage
        self.interval_index = interval_index


class SimultaneityError(EngineError):
    """Charge/discharge disentanglement was handed a solution outside its
    contract (no absorbing period exists while simultaneity remains)."""


class ValuationError(EngineError):
    """The charge-valuation subproblem could not price the stored energy."""
