"""Exception types raised across the package."""


class ScnlsError(Exception):
    """Base class for all package errors."""


class GridError(ScnlsError, ValueError):
    """Invalid grid parameters or mismatched grids."""


class ResolutionError(ScnlsError, ValueError):
    """The grid does not resolve the semiclassical scale."""


class BoundaryMassError(ScnlsError, RuntimeError):
    """Significant mass reached the periodic boundary region."""


class SingularTimeError(ScnlsError, ValueError):
    """A factored observable or phase was requested at a singular time."""


class SolverDivergenceError(ScnlsError, FloatingPointError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step, t):
        super().__init__(f"non-finite field at step {step} (t={t:.6g})")
        self.step = step
        self.t = t


class AssumptionError(ScnlsError, ValueError):
    """Parameters violate a structural hypothesis (potential or nonlinearity)."""


class ConvergenceError(ScnlsError, RuntimeError):
    """A limiting procedure failed to certify convergence."""


class ConfigError(ScnlsError, ValueError):
    """Malformed experiment configuration."""
