"""egocast: graph-free spatio-temporal forecasting for sensor networks."""

__version__ = "0.1.0"

from .autodiff import Tensor, backward
from .rng import SeedStreams

__all__ = ["Tensor", "backward", "SeedStreams", "__version__"]
