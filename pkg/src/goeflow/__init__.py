"""Two-phase porous-media flow on Cartesian grids with adaptive artificial viscosity."""

from goeflow.flux_model import FluidModel
from goeflow.grid import CellField, CornerField, FaceField, GridSpec, build_grid, circular_mask

__version__ = "0.1.0"

__all__ = [
    "CellField",
    "CornerField",
    "FaceField",
    "FluidModel",
    "GridSpec",
    "build_grid",
    "circular_mask",
    "__version__",
]
