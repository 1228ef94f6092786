"""Exception hierarchy.

Each class carries an ``exit_code`` used by the command line front end.
"""


class MatterwaveError(Exception):
    exit_code = 1


class DomainError(MatterwaveError, ValueError):
    """An argument lies outside the domain of a formula."""

    exit_code = 2


class ConfigError(MatterwaveError, ValueError):
    """Invalid configuration text or inconsistent geometry."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedOperationError(MatterwaveError):
    """The operation does not apply to the given species (e.g. fields on a neutral)."""

    exit_code = 2


class NumericalValidityError(MatterwaveError, ArithmeticError):
    exit_code = 3


class ResolutionError(NumericalValidityError):
    """A sampled quadrature does not resolve the oscillation of its kernel."""

    def __init__(self, message, required_samples=None, max_dx=None):
        self.required_samples = required_samples
        self.max_dx = max_dx
        if required_samples is not None:
            message = f"{message} (need at least {required_samples} samples)"
        super().__init__(message)


class ConvergenceError(NumericalValidityError):
    """Adaptive quadrature failed to reach its tolerance."""


class ExpansionInvalidError(NumericalValidityError):
    """Second-order cumulant truncation breaks down (Re kappa_2 <= 0)."""


class EmptyEnsembleError(MatterwaveError):
    """No Monte Carlo sample survived decay culling."""

    exit_code = 4
