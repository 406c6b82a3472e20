"""Exception hierarchy.

Every error raised on purpose by the library derives from ``MixedRatesError``
so the CLI can map the whole family to exit code 1.
"""


class MixedRatesError(Exception):
    """Base class for domain errors."""


class InvalidDistribution(MixedRatesError, ValueError):
    """A probability vector, transition matrix or weight vector is malformed."""


class NonIrreducible(MixedRatesError, ValueError):
    pass


class ZeroProbability(MixedRatesError, ValueError):
    pass


class EmptyNodeSet(MixedRatesError, ValueError):
    pass


class TooLarge(MixedRatesError):
    """Exact enumeration would exceed the configured size bound."""


class DomainError(MixedRatesError, ValueError):
    pass


class InfeasibleA(MixedRatesError, ValueError):
    """The requested first-order rate is not admissible for the target."""

    def __init__(self, message, forced_target=None):
        super().__init__(message)
        self.forced_target = forced_target


class TargetOutOfRange(MixedRatesError, ValueError):
    pass


class ExhaustiveTooLarge(MixedRatesError):
    pass


class PreconditionViolated(MixedRatesError, ValueError):
    pass


class EmptyTypicalSet(MixedRatesError, ValueError):
    pass


class BoundViolation(MixedRatesError, AssertionError):
    """A constructed object broke the inequality its construction guarantees."""


class ConfigError(MixedRatesError, ValueError):
    pass
