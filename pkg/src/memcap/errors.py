"""Shared exception taxonomy.

The command-line layer maps these onto exit codes: parameter problems are
exit 1 (see params.ParameterError), convergence/stability failures exit 2,
and numerical inconsistencies (quadrature, bounds, linear algebra) exit 3.
"""


class ConvergenceError(RuntimeError):
    """A refinement loop hit its resource cap before stabilising."""


class StabilityError(ConvergenceError):
    """Time stepping diverged; the step size is too coarse for the rates."""


class NumericalError(RuntimeError):
    """An internal numerical consistency check failed."""
