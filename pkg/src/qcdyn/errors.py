"""Exception hierarchy shared across the package."""


class QcdynError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(QcdynError):
    """An array does not have the shape required by the material dimensions."""


class SymmetryViolation(QcdynError):
    """A tensor violates one of its index symmetries beyond tolerance.

    Carries the worst offending index tuple and the violation magnitude.
    """

    def __init__(self, message, index=None, magnitude=None):
        super().__init__(message)
        self.index = index
        self.magnitude = magnitude


class NonPositiveDensity(QcdynError):
    """Mass density must be strictly positive."""


class IndefiniteFriction(QcdynError):
    """Friction tensor has a negative eigenvalue (dissipation would be negative)."""


class SingularFriction(QcdynError):
    """Friction tensor is singular or indefinite where strict PD is required."""


class OutOfRegime(QcdynError):
    """Quantity requested outside the dispersion regime where it is defined."""


class EigensolverFailure(QcdynError):
    """Dense eigensolver did not converge."""


class NumericalBlowup(QcdynError):
    """A field became non-finite during time integration."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class MissingSourceDerivative(QcdynError):
    """A plastic velocity source was given without a time-derivative rule."""


class SchemaError(QcdynError):
    """Configuration or file-format validation failed.

    ``errors`` holds every problem found (path-to-field plus message), not
    just the first.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
