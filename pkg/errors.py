#!/usr/bin/env python3
"""
Exception hierarchy for the moderate-deviation lab.

Every error carries a machine-readable reason and the process exit code the
CLI should use: 2 for configuration/validation problems, 3 for numerical
failures.
"""

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class ModdevError(Exception):
    exit_code = EXIT_VALIDATION

    def __init__(self, reason, **details):
        super().__init__(reason)
        self.reason = reason
        self.details = details

    def to_dict(self):
        payload = {"error": type(self).__name__, "reason": self.reason}
        payload.update(self.details)
        return payload


class ConfigError(ModdevError):
    pass


class NotSymmetric(ModdevError):
    pass


class NotPositiveDefinite(ModdevError):
    pass


class DimensionMismatch(ModdevError):
    pass


class EmptyPolytope(ModdevError):
    pass


class InvalidSet(ModdevError):
    """The body violates the standing assumptions (e.g. 0 in the closure)."""


class InvalidAxis(ModdevError):
    pass


class ScheduleError(ModdevError):
    pass


class CovarianceMismatch(ModdevError):
    pass


class NotEnumerable(ModdevError):
    """The instance has no exact evaluation path."""


class TooLarge(NotEnumerable):
    pass


class NumericalFailure(ModdevError):
    exit_code = EXIT_NUMERICAL


class NoConvergence(NumericalFailure):
    pass


class DegenerateG2(NumericalFailure):
    pass


class SupportViolation(NumericalFailure):
    pass


class WeightBoundViolation(NumericalFailure):
    pass
