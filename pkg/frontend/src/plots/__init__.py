"""Figure generation from the simulator's delimited outputs.

This package reads the CSV files written by the ``twoscale`` command and
renders figures from them.  It never imports the simulator: the CSV headers
(optionally cross-checked against the emitted ``schema.txt``) are the whole
interface.
"""

from .tables import PlotDataError, Table, load_schema, read_table
from .figures import plot_convergence, plot_eoc_table, plot_mass

__all__ = [
    "PlotDataError",
    "Table",
    "load_schema",
    "read_table",
    "plot_convergence",
    "plot_eoc_table",
    "plot_mass",
]
