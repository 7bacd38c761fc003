"""Exception types shared across the package."""


class NumericalInvariantError(RuntimeError):
    """A computed quantity violated one of its stated invariants.

    ``invariant`` names the module-level check that failed, so callers (the
    CLI in particular) can report which guarantee broke.
    """

    def __init__(self, message, invariant="unspecified"):
        super().__init__(message)
        self.invariant = invariant


class RankDeficiencyError(NumericalInvariantError):
    pass


class ValidityConditionError(NumericalInvariantError):
    pass


class DegenerateSteadyStateError(NumericalInvariantError):
    pass


class UndefinedCorrelationError(NumericalInvariantError):
    pass


class UndefinedEfficiencyError(NumericalInvariantError):
    pass


class InsufficientDataError(ValueError):
    pass


class RegimeError(ValueError):
    pass
