"""Numerical laboratory for attracting heteroclinic networks with real eigenvalues."""

from .exceptions import (
    ConnectionInferenceError,
    DegenerateGlobalMapError,
    EpsTooLargeError,
    EscapedError,
    HetnetError,
    HypothesisError,
    OnStableManifoldError,
    OutsideChartError,
    SectionError,
    StiffAbort,
)
from .network import (
    ConnectionSpec,
    DerivedConstants,
    EquilibriumSpec,
    NetworkSpec,
    ValidationReport,
    derive_constants,
    load_network,
    make_network,
    principal_sequence,
    validate_hypotheses,
)

__version__ = "0.1.0"

__all__ = [
    "ConnectionInferenceError",
    "ConnectionSpec",
    "DegenerateGlobalMapError",
    "DerivedConstants",
    "EpsTooLargeError",
    "EquilibriumSpec",
    "EscapedError",
    "HetnetError",
    "HypothesisError",
    "NetworkSpec",
    "OnStableManifoldError",
    "OutsideChartError",
    "SectionError",
    "StiffAbort",
    "ValidationReport",
    "derive_constants",
    "load_network",
    "make_network",
    "principal_sequence",
    "validate_hypotheses",
]
