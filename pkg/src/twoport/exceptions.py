"""Exception types shared across the package."""


class TwoportError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TwoportError):
    """Experiment configuration is missing, malformed, or inconsistent."""


class DegenerateCovarianceError(TwoportError):
    """A 2x2 outcome covariance fell below the invertibility guard."""


class SingularCoefficientError(TwoportError):
    """The leading-order coefficient matrix is singular.

    Carries the tuning-constant classification and a short reason so callers
    can report which identifiability condition failed.
    """

    def __init__(self, message: str, classification=None, reason: str = "singular"):
        super().__init__(message)
        self.classification = classification
        self.reason = reason


class IllConditionedFisherError(TwoportError):
    """Fisher matrix inversion refused: condition number above threshold.

    The message names the near-null parameter direction.
    """


class ArtifactError(TwoportError):
    """Writing a CSV/SVG artifact failed; partial output has been removed."""
