from .io import SchemaError, read_ladder, read_map, read_report, read_sweep
from .render import PlotJob, render

__version__ = "0.1.0"
