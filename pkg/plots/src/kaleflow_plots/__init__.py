"""Figure scripts for kaleflow run directories."""

from .figures import (
    FigureInputError,
    plot_curves,
    plot_particles,
    read_points_csv,
    read_trace_csv,
    snapshot_bounds,
)

__version__ = "0.1.0"

__all__ = [
    "FigureInputError",
    "plot_particles",
    "plot_curves",
    "read_points_csv",
    "read_trace_csv",
    "snapshot_bounds",
    "__version__",
]
