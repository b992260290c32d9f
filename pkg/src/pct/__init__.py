"""Rank-based representation transfer: perception coherence, soft-rank losses
and the small-scale experiments built on them."""

from pct.errors import (
    ConfigError,
    InvalidArgument,
    ParseError,
    ShapeMismatch,
    StaleTapeError,
    TieError,
    UndefinedCorrelation,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "InvalidArgument",
    "ParseError",
    "ShapeMismatch",
    "StaleTapeError",
    "TieError",
    "UndefinedCorrelation",
]
