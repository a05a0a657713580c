"""Exception hierarchy shared across the package.

Callers that drive the command line map these onto exit codes: configuration
problems exit with 1, failed hypothesis validation with 2, and solver
non-convergence with 3.
"""


class NehariError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(NehariError):
    """Bad user input: malformed config, unknown keys, inconsistent options."""


class HypothesisError(ConfigError):
    """Problem data violates a structural hypothesis required for the method."""


class EvaluationError(NehariError):
    """A numeric evaluation produced non-finite or otherwise unusable values."""


class SearchError(NehariError):
    """A bracketing or bisection search failed to locate its target."""


class ProjectionError(NehariError):
    """An iterate could not be rescaled onto the Nehari constraint set."""


class EstimationError(NehariError):
    """The extremal-parameter optimizer failed on every start."""


class ContinuationError(NehariError):
    """The increasing-lambda continuation broke down before its target."""
