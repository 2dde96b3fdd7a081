"""Front extraction and grid-orientation metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from goeflow.grid import CellField


class EmptyFrontError(ValueError):
    """The field never crosses the requested level."""


@dataclass
class FrontCurve:
    """Level crossings found along the x- and y-grid lines (x-lines first, scan order)."""

    points: np.ndarray  # (n, 2)
    level: float = 0.5

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class GoeReport:
    circularity: float
    radius_mean: float
    radius_analytic: float
    overshoot: float
    undershoot: float
    mass_residual: float
    front_width: float | None = None
    scheme_discrepancy_L1: float | None = None

    def records(self) -> list[tuple[str, float | None]]:
        return list(asdict(self).items())

    def to_text(self) -> str:
        lines = []
        for name, value in self.records():
            lines.append(f"{name} = {'nan' if value is None else repr(float(value))}")
        return "\n".join(lines) + "\n"


def _active(S: CellField, mask: np.ndarray | None) -> np.ndarray:
    return S.grid.active_mask if mask is None else mask


def extract_front(S: CellField, level: float = 0.5, mask: np.ndarray | None = None) -> FrontCurve:
    """Linear-interpolation crossings of ``level`` between neighbouring active cell centres."""
    g = S.grid
    m = _active(S, mask)
    X, Y = g.cell_centers()
    v = S.values - level
    pts = []
    for axis in (0, 1):
        if axis == 0:
            a, b = v[:-1, :], v[1:, :]
            ok = m[:-1, :] & m[1:, :]
            xa, ya = X[:-1, :], Y[:-1, :]
            h = (g.dx, 0.0)
        else:
            a, b = v[:, :-1], v[:, 1:]
            ok = m[:, :-1] & m[:, 1:]
            xa, ya = X[:, :-1], Y[:, :-1]
            h = (0.0, g.dy)
        # half-open sign test: a value exactly on the level belongs to the upper side
        hit = ok & ((a >= 0) != (b >= 0))
        theta = a[hit] / (a[hit] - b[hit])
        pts.append(np.column_stack([xa[hit] + theta * h[0], ya[hit] + theta * h[1]]))
    points = np.concatenate(pts) if pts else np.empty((0, 2))
    if len(points) == 0:
        raise EmptyFrontError(f"field never crosses level {level}")
    return FrontCurve(points, level)


def front_radii(front: FrontCurve, center: tuple[float, float]) -> np.ndarray:
    d = front.points - np.asarray(center, dtype=float)
    return np.hypot(d[:, 0], d[:, 1])


def circularity(front: FrontCurve, center: tuple[float, float]) -> float:
    """Population standard deviation of the front radii over their mean."""
    if len(front) == 0:
        raise EmptyFrontError("empty front")
    r = front_radii(front, center)
    mean = r.mean()
    if mean == 0.0:
        raise ValueError("mean front radius is zero")
    return float(r.std() / mean)


def scheme_discrepancy(S_a: CellField, S_b: CellField) -> float:
    """Area-weighted mean of ``|S_a - S_b|`` over the active cells."""
    if not S_a.grid.same_geometry(S_b.grid):
        raise ValueError("fields live on different grids")
    m = S_a.grid.active_mask
    # uniform cells: the area weights cancel
    return float(np.abs(S_a.values[m] - S_b.values[m]).mean())


def front_width(
    S: CellField,
    origin: tuple[float, float],
    direction: tuple[float, float] = (1.0, 0.0),
    levels: tuple[float, float] = (0.9, 0.1),
) -> float:
    """Distance along a ray between the first outward crossings of the two levels.

    The field is sampled bilinearly between cell centres, which on an
    axis-aligned ray through cell centres is plain linear interpolation.
    """
    g = S.grid
    d = np.asarray(direction, dtype=float)
    d = d / np.hypot(*d)
    hi, lo = max(levels), min(levels)
    step = min(g.dx, g.dy) / 16.0
    X0, Y0 = g.origin
    # parameter range that stays inside the cell-centre hull
    xmin, xmax = X0 + 0.5 * g.dx, X0 + g.lx - 0.5 * g.dx
    ymin, ymax = Y0 + 0.5 * g.dy, Y0 + g.ly - 0.5 * g.dy
    tmax = np.inf
    for o, c, a, b in ((origin[0], d[0], xmin, xmax), (origin[1], d[1], ymin, ymax)):
        if c > 0:
            tmax = min(tmax, (b - o) / c)
        elif c < 0:
            tmax = min(tmax, (a - o) / c)
    r = np.arange(0.0, tmax + 0.5 * step, step)
    r = r[r <= tmax]
    fi = (origin[0] + r * d[0] - X0) / g.dx - 0.5
    fj = (origin[1] + r * d[1] - Y0) / g.dy - 0.5
    s = ndimage.map_coordinates(S.values, [fi, fj], order=1, mode="nearest")

    def crossing(level: float, start: int) -> float | None:
        below = np.nonzero(s[start:] < level)[0]
        if below.size == 0:
            return None
        k = start + int(below[0])
        if k == 0:
            return 0.0
        s0, s1 = s[k - 1], s[k]
        return float(r[k - 1] + (s0 - level) / (s0 - s1) * (r[k] - r[k - 1]))

    r_hi = crossing(hi, 0)
    if r_hi is None:
        raise EmptyFrontError(f"no crossing of {hi} along the ray")
    start = int(np.searchsorted(r, r_hi))
    r_lo = crossing(lo, max(start - 1, 0))
    if r_lo is None:
        raise EmptyFrontError(f"no crossing of {lo} along the ray")
    return max(r_lo - r_hi, 0.0)


def overshoot(S: CellField, mask: np.ndarray | None = None) -> tuple[float, float]:
    """``(max(S) - 1, -min(S))`` over the active cells, each floored at zero."""
    v = S.values[_active(S, mask)]
    return max(float(v.max()) - 1.0, 0.0), max(-float(v.min()), 0.0)


def audit(S: CellField, mass_residuals=()) -> dict[str, float]:
    """Overshoot, undershoot and the worst per-step relative mass residual."""
    over, under = overshoot(S)
    res = [float(r) for r in mass_residuals]
    return {"overshoot": over, "undershoot": under, "mass_residual": max(res, default=0.0)}


def goe_report(
    S: CellField,
    center: tuple[float, float],
    radius_analytic: float,
    mass_residuals=(),
    level: float = 0.5,
    ray: tuple[float, float] | None = (1.0, 0.0),
    other: CellField | None = None,
) -> GoeReport:
    front = extract_front(S, level)
    r = front_radii(front, center)
    base = audit(S, mass_residuals)
    width = None
    if ray is not None:
        try:
            width = front_width(S, center, ray)
        except EmptyFrontError:
            width = None
    return GoeReport(
        circularity=circularity(front, center),
        radius_mean=float(r.mean()),
        radius_analytic=float(radius_analytic),
        overshoot=base["overshoot"],
        undershoot=base["undershoot"],
        mass_residual=base["mass_residual"],
        front_width=width,
        scheme_discrepancy_L1=None if other is None else scheme_discrepancy(S, other),
    )
