"""Exception types raised across the package."""


class GainConditionError(ValueError):
    """Controller gains violate a hard requirement (ordering, exponent)."""


class AdmissibilityError(ValueError):
    """Parameters of the integral bound violate ``a * alpha > 1``."""


class StiffnessError(RuntimeError):
    """The continuous-time integrator could not make progress."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SynthesisError(RuntimeError):
    """A symbolic identity that holds by construction failed to check."""
