"""Exception hierarchy shared by every module of the package."""


class NMThermoError(Exception):
    """Base class for all package errors."""


class DimensionError(NMThermoError, ValueError):
    """Operands have incompatible or non-square shapes."""


class StateValidityError(NMThermoError, ValueError):
    """A matrix is not a density matrix within tolerance."""


class ParameterError(NMThermoError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ClassificationError(NMThermoError):
    """A generator does not belong to the class an operation requires."""


class NotApplicableError(ClassificationError):
    """The operator form lies outside the hypothesis of a classification test."""


class _TimedError(NMThermoError):
    def __init__(self, message, t=None):
        self.t = t
        if t is not None:
            message = f"{message} (t={t:.17g})"
        super().__init__(message)


class IntegrationError(_TimedError):
    """A state left the density-matrix set during time integration."""


class SingularityError(_TimedError):
    """A rate formula hit a vanishing denominator."""


class ModelValidityError(_TimedError):
    """A closed-form model produced an unphysical state."""
