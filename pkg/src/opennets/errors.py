"""Exception hierarchy shared by the library and the command line."""


class OpenNetsError(Exception):
    """Base class for every error raised on purpose by this package."""


class InterfaceMismatchError(OpenNetsError, ValueError):
    """Two open systems cannot be glued along the given interfaces."""


class DomainError(OpenNetsError, ValueError):
    """A quantity is undefined at the requested point (e.g. log of zero)."""


class DetailedBalanceError(OpenNetsError, ValueError):
    """A supplied equilibrium is not detailed balanced, or none exists."""


class NotSteadyError(OpenNetsError, ValueError):
    """A state that should be steady has a large residual."""


class NonlinearFieldError(OpenNetsError, ValueError):
    """A linear-only routine received a field of degree above one."""


class NumericalError(OpenNetsError, ArithmeticError):
    """An integrator or solver could not proceed safely."""


class UnstableStepError(NumericalError):
    """The requested step size violates the explicit-integrator guard."""
