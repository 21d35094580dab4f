"""Path- and context-sensitive data-dependence analysis for a small SSA language."""
from ._kernel import BACKEND as SAT_BACKEND

__version__ = "0.1.0"
__all__ = ["SAT_BACKEND", "__version__"]
