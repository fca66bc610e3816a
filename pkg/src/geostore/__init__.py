"""Finite-difference simulator for an open-bottom geothermal storage with pipe heat exchangers."""

from .aggregates import aggregation_operators, energy_report, rate_bottom, rate_phx
from .analogous import AnalogousModel, compare, step_analogous
from .assembly import MaterialParams, PumpMode, assemble
from .grid import PhxSpec, StorageGeometry, build_grid, grid_from_steps, index_maps, phx_geometry
from .scenario import Schedule, Segment, SegmentKind, report, run, sweep
from .stepping import SchemeConfig, stability_limit, step_explicit, step_theta

__version__ = "0.1.0"
