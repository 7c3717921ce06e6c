"""Heat and stable-jump kernels, exit problems, and potential theory on
homogeneous trees."""

from .subordinator import StableParams
from .tree import TreeParams

__version__ = "0.1.0"

__all__ = ["TreeParams", "StableParams", "__version__"]
