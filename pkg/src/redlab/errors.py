"""Exception types shared across the package."""


class RedlabError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(RedlabError):
    """Job-type enumeration request is out of range (d > K or K above the cap)."""


class ValidationError(RedlabError):
    """A configuration violates a model invariant."""


class ParseError(RedlabError):
    """A config file line cannot be parsed.

    Carries the offending 1-based line number in ``line``.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DomainError(RedlabError):
    """An analytic formula was evaluated outside its validity region."""


class DegenerateState(RedlabError):
    """A fluid drift is set-valued at this state (some required server mass is zero)."""


class StepTooLarge(RedlabError):
    """The fluid integrator step overshot a kink by more than one step width."""


class NotClosedForm(RedlabError):
    """No closed form is available for this (K, d) pair."""


class TruncationNotConverged(RedlabError):
    """The truncated steady-state solve did not reach the target error bound."""


class SingularSystem(RedlabError):
    """The truncated chain's balance equations are singular (not irreducible)."""


class TooFewCycles(RedlabError):
    """Fewer regeneration cycles than the estimator needs."""


class NoBracket(RedlabError):
    """Both ends of the requested load range produce the same verdict."""


class BudgetExhausted(RedlabError):
    """The probe budget ran out before the bracket reached the tolerance.

    ``best_bracket`` holds the tightest bracket found so far.
    """

    def __init__(self, message: str, best_bracket=None, verdict_trace=None):
        super().__init__(message)
        self.best_bracket = best_bracket
        self.verdict_trace = verdict_trace or []
