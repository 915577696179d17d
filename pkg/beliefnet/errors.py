"""Exception hierarchy shared by every beliefnet module."""

from typing import Any, Dict, Optional


def _restore(cls: type, message: str, state: Dict[str, Any]) -> "BeliefNetError":
    error = cls.__new__(cls, message)
    Exception.__init__(error, message)
    error.__dict__.update(state)
    return error


class BeliefNetError(Exception):
    """
    Base class for all beliefnet failures.

    Instances pickle with their subclass fields and context, so errors raised
    inside replicate worker processes reach the caller intact.
    """

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = dict(context)

    def with_context(self, **context: Any) -> "BeliefNetError":
        """Attaches extra context (agent, replicate, ...) and returns self."""
        self.context.update(context)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{key}={value}" for key, value in sorted(self.context.items()))
        return f"{self.message} ({details})"

    def __reduce__(self):
        return _restore, (type(self), self.message, dict(self.__dict__))


class ValidationError(BeliefNetError):
    """A value object failed one of its construction invariants."""

    def __init__(self, message: str, parameter: Optional[str] = None, **context: Any):
        super().__init__(message, **context)
        self.parameter = parameter


class SelfRelianceViolation(ValidationError):
    """An influence row puts zero weight on the agent itself."""


class StochasticityViolation(ValidationError):
    """An influence row has negative entries or does not sum to one."""


class SupportViolation(ValidationError):
    """An influence row puts weight on an agent that is not a neighbor."""


class DomainError(BeliefNetError):
    """An operation was called outside its precondition."""


class GenerationError(BeliefNetError):
    """A random network could not be generated with the required property."""

    def __init__(self, message: str, attempts: int, **context: Any):
        super().__init__(message, attempts=attempts, **context)
        self.attempts = attempts


class ConvergenceError(BeliefNetError):
    """An iterative method did not reach its tolerance."""

    def __init__(self, message: str, iterations: int, residual: float, **context: Any):
        super().__init__(message, iterations=iterations, residual=residual, **context)
        self.iterations = iterations
        self.residual = residual


class NumericalError(BeliefNetError):
    """A floating point quantity left its representable range."""


class HypothesisViolation(DomainError):
    """An analytic result was requested outside the hypothesis it is stated for."""

    def __init__(self, message: str, rows: Optional[list] = None, **context: Any):
        super().__init__(message, **context)
        self.rows = rows or []


class ConfigError(BeliefNetError):
    """A configuration file or preset could not be parsed."""
