"""Location-aware graph convolutional networks for video question answering."""

from ._lgcn import *  # noqa: F401,F403
from ._lgcn import __doc__  # noqa: F401

__version__ = "0.1.0"
