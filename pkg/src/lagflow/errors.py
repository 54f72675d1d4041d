"""Exception hierarchy shared by all lagflow modules."""


class LagflowError(Exception):
    """Base class for every error raised by lagflow."""


class DegenerateImmersion(LagflowError):
    """The frame lost rank somewhere (det g below threshold)."""


class NIsomorphismFailure(LagflowError):
    """eta is not positive definite, so N is not an isomorphism onto the normal space."""


class NotLagrangian(LagflowError):
    """An identity valid only for Lagrangian data was requested on data with omega != 0."""


class SolverDivergence(LagflowError):
    """Conjugate gradient hit its iteration cap."""


class SingularityStop(LagflowError):
    """The induced metric degenerated below the stop threshold during a flow."""

    def __init__(self, message, t=None, min_eig_g=None):
        super().__init__(message)
        self.t = t
        self.min_eig_g = min_eig_g


class LagrangianViolation(LagflowError):
    """omega grew above tolerance along a flow started from Lagrangian data."""


class InsufficientSnapshots(LagflowError):
    """A finite-difference-in-time check needs more (or uniformly spaced) snapshots."""


class ConfigError(LagflowError, ValueError):
    """Bad scenario name, parameter or command configuration."""
