"""Correlated-Gaussian frames and numerical checks of Gaussian moment and entropy inequalities."""

from gausslm.errors import DivergentError, GaussLMError, NotIntegrableError, UndefinedError
from gausslm.functions import FunctionModel, GaussExpFunction
from gausslm.frames import (
    BlockDecomposition,
    CorrelationFrame,
    SimplexFrame,
    build_correlation_frame,
    build_sr_simplex,
    identity_decomposition,
    tensor_lift,
)
from gausslm.estimate import Budget, EstimateWithError, Method
from gausslm.verify import InequalityVerdict, Relation, Status


__all__ = [
    "BlockDecomposition",
    "Budget",
    "EstimateWithError",
    "InequalityVerdict",
    "Method",
    "Relation",
    "Status",
    "CorrelationFrame",
    "DivergentError",
    "FunctionModel",
    "GaussExpFunction",
    "GaussLMError",
    "NotIntegrableError",
    "SimplexFrame",
    "UndefinedError",
    "build_correlation_frame",
    "build_sr_simplex",
    "identity_decomposition",
    "tensor_lift",
]

__version__ = "0.1.0"
