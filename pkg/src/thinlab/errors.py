"""Exception types raised across the package.

Every error the public API raises on purpose derives from ThinLabError so
callers can catch one base class. Subclasses exist where the failure mode
is actionable in a distinct way (fix the config, fix the data, shrink the
time step, ...).
"""


class ThinLabError(Exception):
    """Base class for all deliberate failures."""


class ConfigError(ThinLabError):
    """Malformed or contradictory run configuration."""


class InputDataError(ThinLabError):
    """Problem data that fails validation (NaN samples, bad shapes, ...)."""


class CompatibilityError(InputDataError):
    """Boundary data does not sit strictly above the obstacle on the edge."""


class CFLError(ThinLabError):
    """Explicit marching step too large for the ellipticity bounds."""


class SweepConvergenceError(ThinLabError):
    """Implicit sweeps did not reach the requested residual in budget."""


class NumericsError(ThinLabError):
    """Non-finite values appeared during marching."""


class BudgetError(ThinLabError):
    """A requested computation exceeds a hard size budget (oracle, sweep)."""


class PreconditionError(ThinLabError):
    """An analysis routine was asked to run outside its valid regime."""
