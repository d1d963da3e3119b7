"""Exception types shared across the package.

Exit-code mapping used by the CLI: DataError -> 2, ConfigError -> 3,
anything else derived from LatentPanelError -> 1.
"""


class LatentPanelError(Exception):
    """Base error; ``stage`` names the pipeline step that raised it."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class DataError(LatentPanelError):
    """Malformed or inadmissible input data (bad CSV, invariant violations)."""


class ShapeError(DataError):
    """Structural mismatch between arrays, distinct from invariant violations."""


class ConfigError(LatentPanelError):
    """Invalid configuration; message may consolidate several problems."""


class EstimationError(LatentPanelError):
    """A computation could not be completed (infeasible imputations, ...)."""


class InfeasibleBandwidthError(EstimationError):
    """No bandwidth candidate allowed the requested computation."""
