"""Hypernetwork TD3 for parametric PDE control: Python bindings."""

from ._hyperl import *  # noqa: F401,F403
from ._hyperl import (  # noqa: F401
    ConfigError,
    DimensionError,
    RUNLOG_HEADER,
    STATS_HEADER,
)
from . import schemas  # noqa: F401
