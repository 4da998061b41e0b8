"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems (ConfigError, bad
arguments) exit 1, oracle violations exit 2, and numerical or structural
failures of the math (the remaining types here) exit 3.
"""


class ErgodicityError(ValueError):
    """Chain is reducible or periodic, or its spectral gap is numerically zero."""


class ReversibilityError(ValueError):
    """Operation requires detailed balance but the chain is not reversible."""


class DegenerateGapError(ValueError):
    """Top two covariance eigenvalues coincide; step-size schedules are undefined."""


class EmptyTraceError(ValueError):
    """Downsampling skip factor exceeds the stream length; no updates would run."""


class ConfigError(ValueError):
    """Malformed experiment configuration (unknown key, bad value, ambiguity)."""
