"""Exception hierarchy.

Every guard that trips on a numerical problem raises a subclass of
:class:`NumericalGuardError`, which the CLI maps to exit status 3.
"""


class NumericalGuardError(ArithmeticError):
    """A numerical safeguard refused to return a value."""


class DegenerateDenominatorError(NumericalGuardError):
    pass


class PrecisionLossError(NumericalGuardError):
    pass


class NonConvergenceError(NumericalGuardError):
    pass


class OptimizerError(NumericalGuardError):
    pass


class TailBoundError(NumericalGuardError):
    pass


class ResolutionError(NumericalGuardError):
    """Too few periods in the sampled range to resolve an oscillation."""


class VariantResolutionError(NumericalGuardError):
    """No candidate form of an asymptotic series matches the exact values."""


class RunawayError(RuntimeError):
    """A simulated CRI exceeded the hard slot cap."""
