"""Countdown processes with geometric delays, finite-field corank
distributions, and certified total-variation distances."""

from .qseries import (
    DEFAULT_TOL,
    DomainError,
    ResourceError,
    Scalar,
    TruncatedProduct,
    g_finite,
    g_infinite,
    q_binomial,
    technical_identity_gap,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL",
    "DomainError",
    "ResourceError",
    "Scalar",
    "TruncatedProduct",
    "g_finite",
    "g_infinite",
    "q_binomial",
    "technical_identity_gap",
    "__version__",
]
