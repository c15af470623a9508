"""Exception hierarchy shared by all modules."""


class MagnlsError(Exception):
    """Base class for all package errors."""


class DomainError(MagnlsError, ValueError):
    """An operation was evaluated outside its domain of definition."""


class ConfigError(MagnlsError, ValueError):
    """A run configuration violates one or more admissibility rules.

    Attributes
    ----------
    violations : list of str
        One human-readable entry per failed predicate.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SolverError(MagnlsError, RuntimeError):
    """Generic failure of an iterative procedure."""


class RayDegenerateError(SolverError):
    """The energy along the ray t -> J(t u) has no interior maximum."""


class ConvergenceError(SolverError):
    """Iteration budget exhausted before the tolerance was reached.

    Attributes
    ----------
    result : object
        Best iterate found so far (a ``SolveResult`` for the PDE solver,
        a float residual for the shooting solver).
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DecayFitError(MagnlsError, RuntimeError):
    """Not enough usable nodes to fit a decay envelope."""
