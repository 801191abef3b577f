"""Bayes-Hilbert coresets: CLR features, likelihood kernel, coreset solvers and bound checks."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
