"""Exception types shared across the package."""


class QspecError(Exception):
    """Base class for qspec errors."""


class UnstableModelError(QspecError, ValueError):
    """AR coefficient curve is not uniformly stable (sup |a| >= 1)."""


class DegenerateCorrelationError(QspecError, ValueError):
    """|rho| >= 1: caller must handle the comonotone limit separately."""


class GridMismatchError(QspecError, ValueError):
    """Two spectra do not share the same frequency grid / tau pairs."""


class ReplicationError(QspecError, ValueError):
    """Not enough replicate paths for a meaningful Monte Carlo estimate."""


class BoundaryError(QspecError, ValueError):
    """Estimation window does not fit inside the observed path."""


class DegenerateDataError(QspecError, ValueError):
    """Input data admits no valid rank transform (ties / constant path)."""


class ConfigError(QspecError, ValueError):
    """Invalid experiment configuration.

    ``line`` is a best-effort 1-based line number in the config file.
    """

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
