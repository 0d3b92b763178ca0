"""Exception and warning types raised across bathsim."""


class BathsimError(Exception):
    """Base class for all bathsim errors."""


class QuadratureDivergenceError(BathsimError):
    """A spectral integral did not converge within tolerance.

    Usually signals that the integrability hypothesis on the coupling
    density is violated (for instance a(0) != 0 makes K infinite).
    """


class SpectrumDomainError(BathsimError, ValueError):
    """A spectral function was evaluated outside its domain."""


class SupportViolationError(BathsimError, ValueError):
    """The coupling is nonzero where the bath density vanishes."""


class PreconditionError(BathsimError, ValueError):
    """A documented precondition of an operation does not hold."""


class RecurrenceHorizonError(BathsimError):
    """Requested horizon exceeds the safe fraction of the recurrence time."""


class IntegrationError(BathsimError):
    """Time integration produced a non-finite state or broke a monitor."""


class ConditioningWarning(UserWarning):
    """Result is near a gap edge where quadrature error is poorly controlled."""
