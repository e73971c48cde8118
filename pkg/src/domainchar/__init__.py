"""Probabilistic domain characterization over physical weather parameters."""

__version__ = "0.1.0"

from .params import ParamDim, ParamSpace, default_space
from .flow import ConditionalFlow
from .domain import DomainCharacterization, ObservationBag, characterize
from .npe import TrainConfig, train

__all__ = ["ParamDim", "ParamSpace", "default_space", "ConditionalFlow",
           "DomainCharacterization", "ObservationBag", "characterize",
           "TrainConfig", "train", "__version__"]
