"""Multi-detector 3D box fusion and pseudo-label pipeline."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
