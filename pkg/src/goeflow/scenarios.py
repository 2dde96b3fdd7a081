"""Radial-injection and five-spot (one injector, four producers) experiment presets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from goeflow.flux_model import FluidModel
from goeflow.grid import CellField, GridSpec, build_grid, circular_mask
from goeflow.pressure import WellSpec, normalize_scheme
from goeflow.transport import DT_COEFF, DT_POWER, ViscosityConfig

# alpha presets (five-point, nine-point) for each experiment
RADIAL_ALPHA = {"5p": 67.0, "9p": 400.0}
FIVE_SPOT_ALPHA = {"5p": 7.0, "9p": 40.0}
# Whether the residual around wells is excluded from the viscosity scale. The
# lone radial injector would otherwise set eps_max and starve the front of
# viscosity; the five-spot alpha presets are sized for the well-dominated scale.
RADIAL_MASK_WELLS = True
FIVE_SPOT_MASK_WELLS = False

DEFAULT_LENGTH = 4.0
FRONT_FRACTION = 0.7


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    n: int
    grid: GridSpec
    wells: tuple[WellSpec, ...]
    boundary_pressure: float | None
    model: FluidModel
    scheme: str
    visc: ViscosityConfig
    t_end: float
    snapshot_times: tuple[float, ...] = ()
    Q: float = 1.0
    phi: float = 1.0
    length: float = DEFAULT_LENGTH
    center: tuple[float, float] = (0.0, 0.0)
    domain_radius: float = 0.0
    injector_offset: tuple[float, float] = (0.0, 0.0)
    dt_coeff: float = DT_COEFF
    dt_power: float = DT_POWER
    # nine-point only: move water along the diagonal links too (False: axial faces only)
    diagonal_transport: bool = True
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if not self.phi > 0:
            raise ValueError("porosity must be positive")
        for t in self.snapshot_times:
            if t < 0 or t > self.t_end * (1 + 1e-12):
                raise ValueError(f"snapshot time {t} outside [0, {self.t_end}]")
        for w in self.wells:
            if not self.grid.active_mask[w.cell]:
                raise ValueError(f"well {w.cell} lies outside the active region")

    @property
    def injector_cells(self) -> list[tuple[int, int]]:
        return [w.cell for w in self.wells if w.kind == "injector"]

    @property
    def alpha(self) -> float:
        return self.visc.alpha

    def initial_saturation(self) -> CellField:
        """Oil-saturated reservoir with water already in the injector cells."""
        S = np.zeros(self.grid.shape)
        for c in self.injector_cells:
            S[c] = 1.0
        return CellField(self.grid, S)

    def replace(self, **changes) -> ScenarioConfig:
        import dataclasses

        return dataclasses.replace(self, **changes)


def analytic_front_radius(Q: float, phi: float, t: float) -> float:
    """Piston front radius ``sqrt(Q t / (pi phi))`` of a point source in a homogeneous disk."""
    if not phi > 0:
        raise ValueError("porosity must be positive")
    if Q < 0 or t < 0:
        raise ValueError("rate and time must be non-negative")
    return math.sqrt(Q * t / (math.pi * phi))


def time_for_front_radius(Q: float, phi: float, r: float) -> float:
    return math.pi * phi * r * r / Q


def _visc(
    viscosity: bool | str, scheme: str, presets: dict[str, float], alpha: float | None, mask_wells: bool
) -> ViscosityConfig:
    on = viscosity in (True, "on", "ON", "On")
    return ViscosityConfig(
        enabled=on, alpha=float(alpha if alpha is not None else presets[scheme]), mask_wells=mask_wells
    )


def radial_scenario(
    n: int,
    M: float,
    scheme: str = "5p",
    viscosity: bool | str = False,
    *,
    alpha: float | None = None,
    length: float = DEFAULT_LENGTH,
    Q: float = 1.0,
    phi: float = 1.0,
    t_end: float | None = None,
    snapshot_times: tuple[float, ...] | None = None,
) -> ScenarioConfig:
    """Single injector in a disk inscribed in an ``n x n`` square, constant pressure outside.

    The disk radius is half the side minus one cell, so the Dirichlet ring
    stays on the grid. With ``n`` even the injector goes to the cell up and
    right of the centre and the offset is recorded in ``injector_offset``.
    """
    if n < 11:
        raise ValueError("radial scenario needs n >= 11")
    scheme = normalize_scheme(scheme)
    grid0 = build_grid(n, n, length, length)
    center = (length / 2.0, length / 2.0)
    radius = length / 2.0 - grid0.dx
    grid = circular_mask(grid0, center, radius)
    k = n // 2
    X, Y = grid.cell_centers()
    offset = (float(X[k, k] - center[0]), float(Y[k, k] - center[1]))
    notes = ()
    if n % 2 == 0:
        notes = (f"even n: injector shifted by {offset} from the disk centre",)
    if t_end is None:
        t_end = time_for_front_radius(Q, phi, FRONT_FRACTION * radius)
    if snapshot_times is None:
        snapshot_times = (t_end,)
    return ScenarioConfig(
        name="radial",
        n=n,
        grid=grid,
        wells=(WellSpec((k, k), "injector", rate=Q),),
        boundary_pressure=0.0,
        model=FluidModel(M),
        scheme=scheme,
        visc=_visc(viscosity, scheme, RADIAL_ALPHA, alpha, RADIAL_MASK_WELLS),
        t_end=float(t_end),
        snapshot_times=tuple(snapshot_times),
        Q=Q,
        phi=phi,
        length=length,
        center=center,
        domain_radius=radius,
        injector_offset=offset,
        notes=notes,
    )


def five_spot_scenario(
    n: int,
    M: float,
    scheme: str = "5p",
    viscosity: bool | str = False,
    *,
    alpha: float | None = None,
    length: float = DEFAULT_LENGTH,
    Q: float = 1.0,
    phi: float = 1.0,
    t_end: float | None = None,
    snapshot_times: tuple[float, ...] | None = None,
) -> ScenarioConfig:
    """Central injector and four corner producers at ``P = 0`` in a closed square."""
    scheme = normalize_scheme(scheme)
    grid = build_grid(n, n, length, length)
    k = n // 2
    center = (length / 2.0, length / 2.0)
    X, Y = grid.cell_centers()
    offset = (float(X[k, k] - center[0]), float(Y[k, k] - center[1]))
    wells = (
        WellSpec((k, k), "injector", rate=Q),
        WellSpec((0, 0), "producer", pressure=0.0),
        WellSpec((n - 1, 0), "producer", pressure=0.0),
        WellSpec((0, n - 1), "producer", pressure=0.0),
        WellSpec((n - 1, n - 1), "producer", pressure=0.0),
    )
    radius = length / 2.0
    if t_end is None:
        # front reaches 70% of the injector-to-edge distance along the axes
        t_end = time_for_front_radius(Q, phi, FRONT_FRACTION * radius)
    if snapshot_times is None:
        snapshot_times = (t_end,)
    return ScenarioConfig(
        name="five-spot",
        n=n,
        grid=grid,
        wells=wells,
        boundary_pressure=None,
        model=FluidModel(M),
        scheme=scheme,
        visc=_visc(viscosity, scheme, FIVE_SPOT_ALPHA, alpha, FIVE_SPOT_MASK_WELLS),
        t_end=float(t_end),
        snapshot_times=tuple(snapshot_times),
        Q=Q,
        phi=phi,
        length=length,
        center=center,
        domain_radius=radius,
        injector_offset=offset,
        notes=() if n % 2 else ("even n: injector off-centre",),
    )


SCENARIOS = {"radial": radial_scenario, "five-spot": five_spot_scenario}


def build_scenario(name: str, n: int, M: float, scheme: str, viscosity: bool | str, **kw) -> ScenarioConfig:
    try:
        builder = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}") from None
    return builder(n, M, scheme, viscosity, **kw)
