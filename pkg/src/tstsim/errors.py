"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class TstError(Exception):
    exit_code = 1


class SchemaError(TstError):
    exit_code = 2


class ValidationError(TstError):
    exit_code = 3


class AssumptionViolation(ValidationError):
    """Raised when the closed-form limit profile is requested for a model outside its hypotheses."""


class OrderViolation(TstError):
    """The pairwise invasion relation is not a strict total order."""

    exit_code = 4


class AmbiguousRank(OrderViolation):
    """A mutant cannot be placed at a unique rank of an ordered trait sequence."""


class NumericalFailure(TstError):
    exit_code = 5


class BlowUp(NumericalFailure):
    pass


class StepUnderflow(NumericalFailure):
    pass


class DegenerateKernel(NumericalFailure):
    pass


class ThinningBoundExceeded(NumericalFailure):
    pass


class UnresolvedEvent(TstError):
    exit_code = 6
