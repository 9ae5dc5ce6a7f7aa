"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class AdoptionError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(AdoptionError, ValueError):
    """Invalid model parameters or scenario values."""


class DomainError(AdoptionError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class ModelInconsistencyError(AdoptionError):
    """A certification step disagreed with the model's own closed forms.

    ``details`` carries whatever diagnostic table produced the failure
    (constraint margins, claimed vs realized regions, ...).
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details if details is not None else {}


class NumericalFailure(AdoptionError):
    """Non-finite values or non-convergence in a numerical routine."""
