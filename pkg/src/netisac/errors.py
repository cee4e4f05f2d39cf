"""Exception types raised across the package."""


class DegenerateGeometryError(ValueError):
    """A point coincides with a base station (distance or angle undefined)."""


class DimensionError(ValueError):
    """Array shapes do not agree with the scene (K, N_t, N_r, M)."""


class DegenerateDetectorError(ValueError):
    """The detector threshold is undefined because the reflection energy is zero."""


class RandomizationFailure(RuntimeError):
    """Every Gaussian randomization trial produced an infeasible power LP."""

    def __init__(self, message, sdr_bound):
        super().__init__(message)
        self.sdr_bound = sdr_bound


class BenchmarkInfeasible(RuntimeError):
    """The communication-only benchmark has no power-feasible solution."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    ``field`` names the offending key (dotted path) when known and ``line``
    the 1-based line number for JSON parse errors.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
