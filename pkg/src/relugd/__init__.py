"""Gradient descent for one-hidden-layer rectified networks with biases.

Training, Gram matrices and their smallest eigenvalues, the convergence-rate
certificate, and Monte Carlo checks of the supporting inequalities.
"""
from relugd._backend import BACKEND
from relugd.errors import (ContractError, DataGenerationError, DimensionError, DivergenceError,
                           DomainError, RelugdError, SchemaError)
from relugd.network import Dataset, RiskGradient, ShallowReluNet

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ContractError", "DataGenerationError", "DimensionError", "DivergenceError",
    "DomainError", "RelugdError", "SchemaError", "Dataset", "RiskGradient", "ShallowReluNet",
]
