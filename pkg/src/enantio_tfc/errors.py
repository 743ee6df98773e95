"""Exception hierarchy shared by all modules."""


class EnantioTFCError(Exception):
    """Base class for package errors."""


class InvalidParametersError(EnantioTFCError, ValueError):
    """Physical parameters violate a precondition."""


class ConfigError(EnantioTFCError, ValueError):
    """A configuration file or override could not be used."""


class DegenerateCycleError(EnantioTFCError, ValueError):
    """One factor of the cyclic coupling product vanishes, so the topology is undefined."""


class GapClosingError(EnantioTFCError):
    """Adiabatic bands touch on the torus grid.

    The offending torus point is stored in ``theta`` when it is known.
    """

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class BoundaryError(EnantioTFCError, ValueError):
    """Requested point sits on a topological phase boundary."""


class IntegratorError(EnantioTFCError, RuntimeError):
    """Time stepping produced an unphysical state."""


class WindowError(EnantioTFCError, ValueError):
    """Averaging window is too short or lies outside the trajectory."""
