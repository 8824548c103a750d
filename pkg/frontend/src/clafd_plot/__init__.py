"""Plotting companion for clafd result files.

Couples to the primary library only through its documented CSV schemas.
"""

from .io import read_summary, read_sweep, read_trace
from .render import plot_sweep, plot_trace, plot_violins

__version__ = "0.1.0"
