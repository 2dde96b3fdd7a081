"""Cartesian grid geometry and the cell/face/corner field containers.

Index conventions (all arrays are indexed ``[i, j]`` with ``i`` along x):

* cell ``(i, j)`` has its center at ``origin + ((i + 1/2) dx, (j + 1/2) dy)``;
* x-face ``a`` in ``0..nx`` sits at ``x = origin_x + a*dx`` and separates
  cells ``a-1`` and ``a``; y-faces are analogous;
* corner ``(k, l)`` in ``0..nx x 0..ny`` sits at ``origin + (k dx, l dy)``.
  In half-index notation corner ``(i+1/2, j+1/2)`` is stored at ``[i+1, j+1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage


@dataclass(frozen=True, eq=False)
class GridSpec:
    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float] = (0.0, 0.0)
    active_mask: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3x3 cells, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError(f"cell sizes must be positive, got dx={self.dx}, dy={self.dy}")
        mask = self.active_mask
        if mask is None:
            mask = np.ones((self.nx, self.ny), dtype=bool)
        mask = np.array(mask, dtype=bool)
        if mask.shape != (self.nx, self.ny):
            raise ValueError(f"active_mask shape {mask.shape} != {(self.nx, self.ny)}")
        if not mask.any():
            raise ValueError("degenerate domain: no active cells")
        mask.setflags(write=False)
        object.__setattr__(self, "active_mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def lx(self) -> float:
        return self.nx * self.dx

    @property
    def ly(self) -> float:
        return self.ny * self.dy

    @property
    def is_square(self) -> bool:
        return bool(np.isclose(self.dx, self.dy, rtol=1e-12, atol=0.0))

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays of shape ``(nx, ny)``."""
        x = self.origin[0] + (np.arange(self.nx) + 0.5) * self.dx
        y = self.origin[1] + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def corner_points(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + np.arange(self.nx + 1) * self.dx
        y = self.origin[1] + np.arange(self.ny + 1) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    @property
    def ring_mask(self) -> np.ndarray:
        """Inactive cells touching an active cell (8-neighbourhood).

        These carry Dirichlet pressure and the downstream saturation. The
        diagonal contact matters for the nine-point stencil.
        """
        grown = ndimage.binary_dilation(self.active_mask, structure=np.ones((3, 3), dtype=bool))
        return grown & ~self.active_mask

    @cached_property
    def nearest_active(self) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays mapping every cell to its nearest active cell."""
        if self.active_mask.all():
            return np.indices(self.shape)
        _, (ii, jj) = ndimage.distance_transform_edt(~self.active_mask, return_indices=True)
        return ii, jj

    @property
    def domain_mask(self) -> np.ndarray:
        """Active cells plus the Dirichlet ring."""
        return self.active_mask | self.ring_mask

    def x_face_cells(self, a: int, j: int) -> tuple[tuple[int, int] | None, tuple[int, int] | None]:
        """Cells on the low and high side of x-face ``(a, j)``; ``None`` off-grid."""
        lo = (a - 1, j) if a >= 1 else None
        hi = (a, j) if a <= self.nx - 1 else None
        return lo, hi

    def y_face_cells(self, i: int, b: int) -> tuple[tuple[int, int] | None, tuple[int, int] | None]:
        lo = (i, b - 1) if b >= 1 else None
        hi = (i, b) if b <= self.ny - 1 else None
        return lo, hi

    def cell_faces(self, i: int, j: int) -> dict[str, tuple[str, int, int]]:
        """The four faces bounding cell ``(i, j)`` as ``(kind, index0, index1)``."""
        return {
            "west": ("x", i, j),
            "east": ("x", i + 1, j),
            "south": ("y", i, j),
            "north": ("y", i, j + 1),
        }

    def same_geometry(self, other: GridSpec) -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and self.dx == other.dx
            and self.dy == other.dy
            and tuple(self.origin) == tuple(other.origin)
            and bool(np.array_equal(self.active_mask, other.active_mask))
        )


def build_grid(nx: int, ny: int, lx: float, ly: float, origin: tuple[float, float] = (0.0, 0.0)) -> GridSpec:
    """Uniform grid of ``nx x ny`` cells covering ``[0, lx] x [0, ly]`` (shifted by origin)."""
    if int(nx) != nx or int(ny) != ny:
        raise ValueError("cell counts must be integers")
    if not (lx > 0 and ly > 0):
        raise ValueError(f"domain lengths must be positive, got lx={lx}, ly={ly}")
    return GridSpec(int(nx), int(ny), lx / nx, ly / ny, (float(origin[0]), float(origin[1])))


def circular_mask(grid: GridSpec, center: tuple[float, float], radius: float) -> GridSpec:
    """Restrict ``grid`` to cells whose centers lie strictly inside a circle.

    The circle must fit inside the grid rectangle. Cells outside it stay in
    the arrays; the inactive cells touching the disk form the boundary ring.
    """
    if radius <= 0:
        raise ValueError("degenerate domain: radius must be positive")
    cx, cy = center
    x0, y0 = grid.origin
    tol = 1e-12 * max(grid.lx, grid.ly)
    if (
        cx - radius < x0 - tol
        or cx + radius > x0 + grid.lx + tol
        or cy - radius < y0 - tol
        or cy + radius > y0 + grid.ly + tol
    ):
        raise ValueError("circle is not contained in the grid rectangle")
    X, Y = grid.cell_centers()
    # squared distances compared exactly so that the mask keeps the square's symmetry
    inside = (X - cx) ** 2 + (Y - cy) ** 2 < radius**2
    if not inside.any():
        raise ValueError("degenerate domain: no cell center inside the circle")
    return GridSpec(grid.nx, grid.ny, grid.dx, grid.dy, grid.origin, inside)


@dataclass(eq=False)
class CellField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"cell field shape {self.values.shape} != {self.grid.shape}")

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> CellField:
        return cls(grid, np.full(grid.shape, float(value)))

    def copy(self) -> CellField:
        return CellField(self.grid, self.values.copy())


@dataclass(eq=False)
class FaceField:
    grid: GridSpec
    x_values: np.ndarray
    y_values: np.ndarray

    def __post_init__(self) -> None:
        self.x_values = np.asarray(self.x_values, dtype=float)
        self.y_values = np.asarray(self.y_values, dtype=float)
        g = self.grid
        if self.x_values.shape != (g.nx + 1, g.ny):
            raise ValueError(f"x-face shape {self.x_values.shape} != {(g.nx + 1, g.ny)}")
        if self.y_values.shape != (g.nx, g.ny + 1):
            raise ValueError(f"y-face shape {self.y_values.shape} != {(g.nx, g.ny + 1)}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> FaceField:
        return cls(grid, np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    def max_abs(self) -> float:
        return float(max(np.abs(self.x_values).max(), np.abs(self.y_values).max()))


@dataclass(eq=False)
class CornerField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        g = self.grid
        if self.values.shape != (g.nx + 1, g.ny + 1):
            raise ValueError(f"corner shape {self.values.shape} != {(g.nx + 1, g.ny + 1)}")


def interior_face_masks(grid: GridSpec, cells: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of x- and y-faces whose two neighbouring cells are both in ``cells``."""
    m = grid.active_mask if cells is None else cells
    fx = np.zeros((grid.nx + 1, grid.ny), dtype=bool)
    fy = np.zeros((grid.nx, grid.ny + 1), dtype=bool)
    fx[1:-1, :] = m[:-1, :] & m[1:, :]
    fy[:, 1:-1] = m[:, :-1] & m[:, 1:]
    return fx, fy


def fill_from_nearest(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Copy ``values`` and replace entries outside ``mask`` by the nearest masked entry."""
    if mask.all():
        return values.copy()
    _, (ii, jj) = ndimage.distance_transform_edt(~mask, return_indices=True)
    return values[ii, jj]


@dataclass(eq=False)
class FluxField:
    """Volumetric interface rates (volume per unit time, not velocities).

    ``x[a, j]`` is the rate through x-face ``(a, j)`` in the +x direction,
    ``y`` likewise in +y. The optional nine-point diagonal links are
    ``ne[i, j]`` from cell ``(i, j)`` to ``(i+1, j+1)`` and ``nw[i, j]`` from
    ``(i+1, j)`` to ``(i, j+1)``, both of shape ``(nx-1, ny-1)``.
    """

    grid: GridSpec
    x: np.ndarray
    y: np.ndarray
    ne: np.ndarray | None = None
    nw: np.ndarray | None = None

    @classmethod
    def from_velocity(cls, vel: FaceField) -> FluxField:
        g = vel.grid
        return cls(g, vel.x_values * g.dy, vel.y_values * g.dx)

    def to_velocity(self) -> FaceField:
        g = self.grid
        return FaceField(g, self.x / g.dy, self.y / g.dx)

    @property
    def has_diagonals(self) -> bool:
        return self.ne is not None

    def net_outflow(self) -> np.ndarray:
        """Signed rate leaving each cell through all of its links."""
        out = self.x[1:, :] - self.x[:-1, :] + self.y[:, 1:] - self.y[:, :-1]
        if self.ne is not None:
            out[:-1, :-1] += self.ne
            out[1:, 1:] -= self.ne
            out[1:, :-1] += self.nw
            out[:-1, 1:] -= self.nw
        return out

    def outgoing(self) -> np.ndarray:
        """Total rate leaving each cell, counting outward links only."""
        px, py = np.maximum(self.x, 0.0), np.maximum(self.y, 0.0)
        nx_, ny_ = np.maximum(-self.x, 0.0), np.maximum(-self.y, 0.0)
        out = px[1:, :] + nx_[:-1, :] + py[:, 1:] + ny_[:, :-1]
        if self.ne is not None:
            out[:-1, :-1] += np.maximum(self.ne, 0.0)
            out[1:, 1:] += np.maximum(-self.ne, 0.0)
            out[1:, :-1] += np.maximum(self.nw, 0.0)
            out[:-1, 1:] += np.maximum(-self.nw, 0.0)
        return out
