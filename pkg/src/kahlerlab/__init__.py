"""Numerical laboratory for Kaehler metrics with a Killing potential and their special biconformal changes."""

from .report import ResidualEntry, ResidualReport
from .scalarfun import Interval, TauFunction

__all__ = ["Interval", "ResidualEntry", "ResidualReport", "TauFunction"]
__version__ = "0.1.0"
