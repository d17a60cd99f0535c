"""Multimodal silent speech recognition toolkit (C++ core)."""

from ._mona import *  # noqa: F401,F403
from ._mona import __doc__  # noqa: F401
