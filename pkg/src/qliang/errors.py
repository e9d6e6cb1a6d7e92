"""Exception hierarchy."""


class QLiangError(Exception):
    """Base class for library errors."""


class RegistryError(QLiangError, ValueError):
    """Unknown site label, duplicate label or dimension mismatch."""


class DimensionCapError(QLiangError):
    """Total Hilbert-space dimension exceeds the configured cap."""


class NonHermitianError(QLiangError, ValueError):
    pass


class StateError(QLiangError, ValueError):
    """Matrix is not a valid density matrix within tolerance."""


class NonUnitaryError(QLiangError, ValueError):
    pass


class FlowRequestError(QLiangError, ValueError):
    pass


class ConvergenceError(QLiangError):
    """Reservoir discretisation too coarse for the requested parameters."""


class StabilityError(QLiangError, ValueError):
    """Time step violates the advection CFL bound."""


class BoundaryMassError(QLiangError, ValueError):
    """Density is not negligible at the edge of the grid box."""


class ConfigError(QLiangError, ValueError):
    """Scenario file failed validation."""
