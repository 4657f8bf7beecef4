"""Exception hierarchy shared by all liouvlab modules."""


class LiouvlabError(Exception):
    """Base class for all liouvlab errors."""


class ConfigError(LiouvlabError):
    """Invalid or inconsistent run configuration (unknown keys, bad values)."""


class NumericalError(LiouvlabError):
    """Base class for errors raised by numerical routines."""


class NonConvergence(NumericalError):
    """An iterative solver failed to converge."""


class Overflow(NumericalError):
    """Input norm exceeds the documented safe bound of a routine."""


class NotHermitian(NumericalError):
    """A matrix expected to be Hermitian is not, within tolerance."""


class NotDensityMatrix(NumericalError):
    """A matrix expected to be a density matrix fails trace/Hermiticity/positivity checks."""


class OutOfRange(LiouvlabError):
    """A scalar argument lies outside its documented domain."""


class DomainError(LiouvlabError):
    """Operation invoked outside the parameter regime where it is defined."""


class NoSteadyState(NumericalError):
    """No eigenvalue close enough to zero to identify a steady state."""


class DegenerateSteadyState(NumericalError):
    """More than one zero eigenvalue: the steady state is not unique."""


class ZeroNorm(NumericalError):
    """A state vector was annihilated (norm zero) where a unit vector is required."""


class InsufficientData(LiouvlabError):
    """Too few samples for the requested estimation."""


class DegenerateInput(LiouvlabError):
    """Input data is degenerate for the requested operation (e.g. non-increasing time grid)."""
