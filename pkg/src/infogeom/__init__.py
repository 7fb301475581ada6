"""Information and estimation quantities of linear vector Gaussian channels, with their derivatives."""
from .model import (
    ChannelSpec,
    DiscreteInput,
    GaussianInput,
    MonteCarlo,
    Quadrature,
    ScenarioError,
    UnsupportedError,
)

__all__ = [
    "ChannelSpec",
    "DiscreteInput",
    "GaussianInput",
    "MonteCarlo",
    "Quadrature",
    "ScenarioError",
    "UnsupportedError",
]
__version__ = "0.1.0"
