"""Batch plotting for qcdyn output files.

Reads the documented CSV / raw-snapshot / JSON formats and renders figures:
dispersion branches with the critical wavenumber marked, probe-envelope decay
fits, phase-velocity curves, wavefield frames and energy histories.  No
physics is recomputed here; fitted constants come from regression on the
emitted data.
"""

__version__ = "0.1.0"

from .io import MissingColumns, QcvizError, SchemaMismatch, read_csv
from .plots import PlotJob, RenderResult, render
