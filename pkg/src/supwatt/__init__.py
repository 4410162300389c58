"""supwatt: per-appliance power trace simulation, detection, and mode classification.

The pipeline stages map onto the submodules:

- :mod:`supwatt.core`: trace value types and the trace CSV format.
- :mod:`supwatt.simulator`: labeled daily trace generation from usage-profile models.
- :mod:`supwatt.detection`: turn-on detection by normalized absolute-difference
  cross-correlation, thresholding, and residue-maximum extraction.
- :mod:`supwatt.classification`: operation-mode classification by dynamic time
  warping against per-mode reference patterns.
- :mod:`supwatt.evaluation`: detection/classification scoring, pattern-size sweeps,
  and demand-response recommendations.
- :mod:`supwatt.cli`: the ``supwatt`` command line entry point.
"""

from supwatt.core import (
    OutOfRangeError,
    PowerSeries,
    ReferencePattern,
    Sup,
    SupwattError,
    TraceFormatError,
    ValidationError,
    load_series,
    max_value,
    save_series,
    slice_series,
)

__version__ = "0.1.0"

__all__ = [
    "PowerSeries",
    "Sup",
    "ReferencePattern",
    "SupwattError",
    "ValidationError",
    "OutOfRangeError",
    "TraceFormatError",
    "load_series",
    "save_series",
    "slice_series",
    "max_value",
    "__version__",
]
