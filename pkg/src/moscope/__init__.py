"""Neural MOS prediction for synthetic speech, with speaker- and system-level ranking."""
from .nn import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
