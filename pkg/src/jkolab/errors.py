"""Exception hierarchy shared by the numerical modules and the CLI."""


class JKOLabError(Exception):
    """Base class for every error raised by jkolab."""


class NumericalError(JKOLabError):
    """A computation could not produce a trustworthy result."""


class InvalidDensity(NumericalError):
    """A density violates the floor or unit-mass invariant."""


class NonConvergence(NumericalError):
    """Newton iteration cap exceeded."""


class MonotonicityLoss(NumericalError):
    """A transport map or quantile vector stopped being strictly increasing."""


class SmallnessViolated(NumericalError):
    """The time step is too large for a smallness hypothesis to hold."""


class InsufficientData(NumericalError):
    """Not enough samples for a scaling fit."""


class OracleTooCoarse(NumericalError):
    """The PDE reference solution is not accurate enough to judge the JKO error."""


class UsageError(JKOLabError):
    """Invalid command-line or config-file input.

    Parameters
    ----------
    field : str
        Name of the offending flag or config key.
    expected : str
        Human-readable description of the accepted form.
    """

    def __init__(self, field, expected, detail=""):
        self.field = field
        self.expected = expected
        msg = f"{field}: expected {expected}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnknownFlag(UsageError):
    pass


class InvalidValue(UsageError):
    pass


class MissingRequired(UsageError):
    pass
