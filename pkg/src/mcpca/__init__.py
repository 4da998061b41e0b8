"""Streaming principal component estimation from Markovian data streams.

Subpackages by concern:

- markov: finite-state chains, spectra, mixing times, stationary sampling
- statedist: per-state sample distributions and the total covariance
- streaming: the normalized rank-one update, step schedules, error traces
- offline: empirical-covariance baseline via power iteration
- oracle: exact small-instance verification of the spectral machinery
- harness: experiment orchestration, CSV/SVG emission, configs
"""

from .errors import (ConfigError, DegenerateGapError, EmptyTraceError,
                     ErgodicityError, ReversibilityError)

__all__ = [
    "ConfigError",
    "DegenerateGapError",
    "EmptyTraceError",
    "ErgodicityError",
    "ReversibilityError",
]

__version__ = "0.1.0"
