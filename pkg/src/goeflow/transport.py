"""Explicit conservative saturation update with adaptive artificial viscosity.

One step advances

    dS/dt + df/dx + dg/dy = C [d/dx(eps dS/dx) + d/dy(eps dS/dy)],   f = u F(S), g = v F(S)

with first-order upwind advection over the same links the pressure scheme
uses, and a two-point diffusion flux on the axial faces. ``eps`` is driven by
the weak local residual (WLR) of the last two time levels, evaluated on the
cell corners, and ``C`` normalises the largest face value so that the
diffusion number never exceeds ``((dx)^2 + (dy)^2) / (alpha dx^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from goeflow.flux_model import FluidModel
from goeflow.grid import (
    CellField,
    CornerField,
    FaceField,
    FluxField,
    GridSpec,
    interior_face_masks,
)
from goeflow.pressure import WellSpec

DT_COEFF = 33.5
DT_POWER = 3.3
CFL_SAFETY = 0.9
# per-cell diffusion number allowed in one diffusion sub-step
DIFFUSION_SUBSTEP_LOAD = 0.5

class CFLError(RuntimeError):
    """Requested step exceeds the advective stability bound."""


@dataclass(frozen=True)
class ViscosityConfig:
    enabled: bool = False
    alpha: float = 4.0
    C_override: float | None = None
    mask_wells: bool = True

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass(eq=False)
class TransportState:
    """Saturation at the current and previous time levels plus the flux samples.

    ``f_curr``/``g_curr`` are the cell-centred ``u F(S)`` and ``v F(S)`` at
    the current level; they are filled in by :func:`advance` once the
    current velocity is known. ``S_prev``/``f_prev``/``g_prev`` are ``None``
    until one step has been taken.
    """

    t: float
    S_curr: CellField
    S_prev: CellField | None = None
    f_curr: CellField | None = None
    g_curr: CellField | None = None
    f_prev: CellField | None = None
    g_prev: CellField | None = None
    dt_prev: float | None = None
    step: int = 0

    @classmethod
    def initial(cls, S0: CellField, t0: float = 0.0) -> TransportState:
        return cls(t=t0, S_curr=S0.copy())

    @property
    def grid(self) -> GridSpec:
        return self.S_curr.grid

    @property
    def has_history(self) -> bool:
        return self.S_prev is not None and self.f_prev is not None and self.dt_prev is not None


@dataclass(frozen=True)
class MassRecord:
    """Water volume balance of one step over the active, non-injector cells."""

    dV: float
    injected: float
    boundary_outflow: float
    produced: float
    transfer: float = 0.0  # gross volume moved between cells, the scale of a closed system

    @property
    def expected(self) -> float:
        return self.injected - self.boundary_outflow - self.produced

    @property
    def residual(self) -> float:
        scale = max(
            abs(self.injected), abs(self.dV), abs(self.boundary_outflow) + abs(self.produced), self.transfer
        )
        if scale == 0.0:
            return abs(self.dV - self.expected)
        return abs(self.dV - self.expected) / scale


@dataclass(frozen=True)
class StepInfo:
    dt: float
    C: float
    eps_max: float
    diffusion_number: float
    mass: MassRecord
    S_max: float
    S_min: float
    eps: FaceField | None = field(default=None, repr=False)
    diffusion_substeps: int = 1


# ---------------------------------------------------------------------------
# fluxes


def upwind_face_flux(S: CellField, vel: FaceField, model: FluidModel) -> FaceField:
    """``f = u F(S_up)`` and ``g = v F(S_up)`` on every face (zero on the outer edges)."""
    F = model.fractional_flow(S.values)
    u, v = vel.x_values, vel.y_values
    f = np.zeros_like(u)
    g = np.zeros_like(v)
    f[1:-1, :] = u[1:-1, :] * np.where(u[1:-1, :] >= 0, F[:-1, :], F[1:, :])
    g[:, 1:-1] = v[:, 1:-1] * np.where(v[:, 1:-1] >= 0, F[:, :-1], F[:, 1:])
    return FaceField(S.grid, f, g)


def cell_velocity(flux: FluxField | FaceField) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centred total velocity reconstructed from the link rates.

    Each cell averages the x-directed rates of its two x-faces and half the
    x-directed rates of its four diagonal links (this recovers a uniform
    velocity exactly for the nine-point weights); y likewise.
    """
    if isinstance(flux, FaceField):
        flux = FluxField.from_velocity(flux)
    g = flux.grid
    qu = 0.5 * (flux.x[:-1, :] + flux.x[1:, :])
    qv = 0.5 * (flux.y[:, :-1] + flux.y[:, 1:])
    if flux.ne is not None:
        ne, nw = flux.ne, flux.nw
        dx_sum = np.zeros(g.shape)
        dy_sum = np.zeros(g.shape)
        # ne links point to +x,+y; nw links point to -x,+y
        dx_sum[:-1, :-1] += ne
        dx_sum[1:, 1:] += ne
        dx_sum[1:, :-1] -= nw
        dx_sum[:-1, 1:] -= nw
        dy_sum[:-1, :-1] += ne
        dy_sum[1:, 1:] += ne
        dy_sum[1:, :-1] += nw
        dy_sum[:-1, 1:] += nw
        qu = qu + 0.5 * dx_sum
        qv = qv + 0.5 * dy_sum
    return qu / g.dy, qv / g.dx


def cell_flux(S: CellField, flux: FluxField | FaceField, model: FluidModel) -> tuple[CellField, CellField]:
    """Cell-centred samples ``f = u F(S)``, ``g = v F(S)`` used by the WLR."""
    u, v = cell_velocity(flux)
    F = model.fractional_flow(S.values)
    return CellField(S.grid, u * F), CellField(S.grid, v * F)


# ---------------------------------------------------------------------------
# weak local residual and viscosity


def _corner_samples(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Bilinear corner values; inactive and off-grid cells copy the nearest active cell."""
    ii, jj = grid.nearest_active
    p = np.pad(values[ii, jj], 1, mode="edge")
    return 0.25 * (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:])


def _simpson_along(a: np.ndarray, axis: int) -> np.ndarray:
    """``a[k-1] + 4 a[k] + a[k+1]`` along ``axis`` with edge extension."""
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    p = np.pad(a, pad, mode="edge")
    n = a.shape[axis]
    lo = np.take(p, range(0, n), axis=axis)
    mid = np.take(p, range(1, n + 1), axis=axis)
    hi = np.take(p, range(2, n + 2), axis=axis)
    return lo + 4.0 * mid + hi


def _centered_difference(a: np.ndarray, axis: int) -> np.ndarray:
    """``a[k+1] - a[k-1]`` along ``axis`` with edge extension."""
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    p = np.pad(a, pad, mode="edge")
    n = a.shape[axis]
    return np.take(p, range(2, n + 2), axis=axis) - np.take(p, range(0, n), axis=axis)


def compute_wlr(state: TransportState, dt: float, grid: GridSpec | None = None) -> CornerField:
    """Weak local residual ``E`` between the previous and current time levels.

    ``dt`` is the step separating the two levels. At corner ``(k, l)``::

        E = dx dy / (36 D) * U + 1 / (12 D) * (dy dt Fx + dx dt Gy),   D = max(dt, dx, dy)

    where ``U`` is the 1-4-16 weighted sum of ``S^n - S^{n-1}`` over the 3x3
    corner block around ``(k, l)``, and ``Fx`` (``Gy``) sums the differences
    of ``f^n + f^{n-1}`` between the corners two spacings apart in x (y),
    weighted 1-4-1 across. Cell samples are carried to corners by 2x2
    averaging with constant extension beyond the active region.
    """
    if not state.has_history or state.f_curr is None:
        raise ValueError("WLR needs two time levels and the current flux samples")
    grid = grid or state.grid
    if not dt > 0:
        raise ValueError("dt must be positive")
    dS = _corner_samples(state.S_curr.values, grid) - _corner_samples(state.S_prev.values, grid)
    fs = _corner_samples(state.f_curr.values, grid) + _corner_samples(state.f_prev.values, grid)
    gs = _corner_samples(state.g_curr.values, grid) + _corner_samples(state.g_prev.values, grid)

    U = _simpson_along(_simpson_along(dS, 0), 1)
    Fx = _simpson_along(_centered_difference(fs, 0), 1)
    Gy = _simpson_along(_centered_difference(gs, 1), 0)

    dx, dy = grid.dx, grid.dy
    big = max(dt, dx, dy)
    E = dx * dy / (36.0 * big) * U + (dy * dt * Fx + dx * dt * Gy) / (12.0 * big)
    return CornerField(grid, E)


def _mask_well_corners(E: CornerField, wells) -> None:
    """Zero ``E`` on corners whose stencil reaches a well cell."""
    for w in wells:
        i, j = w.cell
        E.values[max(i - 1, 0) : i + 3, max(j - 1, 0) : j + 3] = 0.0


def epsilon_faces(E: CornerField) -> FaceField:
    """Face diffusivity: the largest ``|E|`` over the six corners of the two cells sharing the face."""
    g = E.grid
    a = np.abs(E.values)
    px = np.pad(a, ((1, 1), (0, 0)))
    mx = np.maximum(np.maximum(px[:-2, :], px[1:-1, :]), px[2:, :])
    ex = np.maximum(mx[:, :-1], mx[:, 1:])
    py = np.pad(a, ((0, 0), (1, 1)))
    my = np.maximum(np.maximum(py[:, :-2], py[:, 1:-1]), py[:, 2:])
    ey = np.maximum(my[:-1, :], my[1:, :])
    return FaceField(g, ex, ey)


def viscosity_coefficient(eps_max: float, grid: GridSpec, dt: float, alpha: float) -> float:
    """``C = (dx^2 + dy^2) / (alpha dt eps_max)``; zero on a smooth field (``eps_max == 0``)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if eps_max < 0:
        raise ValueError("eps_max must be non-negative")
    if eps_max == 0.0:
        return 0.0
    # exact rational evaluation, rounded once
    dx, dy = Fraction(grid.dx), Fraction(grid.dy)
    return float((dx * dx + dy * dy) / (Fraction(alpha) * Fraction(dt) * Fraction(eps_max)))


# ---------------------------------------------------------------------------
# time step


def time_step(dx: float, coeff: float = DT_COEFF, power: float = DT_POWER) -> float:
    """Power-law step ``coeff * dx**power`` (before any CFL cap)."""
    if not dx > 0:
        raise ValueError("dx must be positive")
    return coeff * dx**power


def cfl_limit(
    flux: FluxField,
    model: FluidModel,
    phi: float = 1.0,
    pinned: np.ndarray | None = None,
    safety: float = CFL_SAFETY,
    well_outflow: np.ndarray | None = None,
) -> float:
    """Largest upwind-monotone step: ``safety * phi V / (max F' * outgoing rate)`` over free cells."""
    g = flux.grid
    out = flux.outgoing()
    if well_outflow is not None:
        out = out + well_outflow
    free = g.active_mask.copy()
    if pinned is not None:
        free &= ~pinned
    rate = out[free].max() if free.any() else 0.0
    if rate <= 0.0:
        return np.inf
    return safety * phi * g.cell_area / (model.max_dfds * rate)


def stable_time_step(
    flux: FluxField,
    model: FluidModel,
    phi: float = 1.0,
    pinned: np.ndarray | None = None,
    coeff: float = DT_COEFF,
    power: float = DT_POWER,
    well_outflow: np.ndarray | None = None,
) -> float:
    return min(time_step(flux.grid.dx, coeff, power), cfl_limit(flux, model, phi, pinned, well_outflow=well_outflow))


# ---------------------------------------------------------------------------
# update


def _links(flux: FluxField):
    """Yield ``(src_slice, dst_slice, rate)`` for every link family (positive rate: src -> dst)."""
    yield (slice(None, -1), slice(None)), (slice(1, None), slice(None)), flux.x[1:-1, :]
    yield (slice(None), slice(None, -1)), (slice(None), slice(1, None)), flux.y[:, 1:-1]
    if flux.ne is not None:
        yield (slice(None, -1), slice(None, -1)), (slice(1, None), slice(1, None)), flux.ne
        yield (slice(1, None), slice(None, -1)), (slice(None, -1), slice(1, None)), flux.nw


def _well_masks(grid: GridSpec, wells) -> tuple[np.ndarray, np.ndarray]:
    inj = np.zeros(grid.shape, dtype=bool)
    prod = np.zeros(grid.shape, dtype=bool)
    for w in wells:
        (inj if w.kind == "injector" else prod)[w.cell] = True
    return inj, prod


def advance(
    state: TransportState,
    vel: FluxField | FaceField,
    model: FluidModel,
    visc: ViscosityConfig,
    dt: float,
    wells: list[WellSpec] | tuple[WellSpec, ...] = (),
    phi: float = 1.0,
    cfl_safety: float = CFL_SAFETY,
) -> tuple[TransportState, StepInfo]:
    """One explicit step of the saturation equation.

    ``vel`` is either the link rates of the pressure scheme or plain face
    velocities (five-point links). Injector cells are reset to ``S = 1``;
    producers remove ``q F(S)`` where ``q`` is the net inflow of the cell.
    Raises :class:`CFLError` if ``dt`` exceeds the upwind bound.
    """
    flux = FluxField.from_velocity(vel) if isinstance(vel, FaceField) else vel
    grid = state.grid
    if not dt > 0:
        raise ValueError("dt must be positive")
    act = grid.active_mask
    inj, prod = _well_masks(grid, wells)
    S = state.S_curr.values
    F = model.fractional_flow(S)
    V = phi * grid.cell_area

    prod_rate = producer_outflow(flux, wells)
    limit = cfl_limit(flux, model, phi, pinned=inj, safety=cfl_safety, well_outflow=prod_rate)
    if dt > limit * (1.0 + 1e-12):
        raise CFLError(f"dt={dt:.6g} exceeds the advective limit {limit:.6g}")

    f_c, g_c = cell_flux(state.S_curr, flux, model)
    current = replace(state, f_curr=f_c, g_curr=g_c)

    # water link rates: advection (upwind) and artificial diffusion on axial faces
    water = FluxField(grid, np.zeros_like(flux.x), np.zeros_like(flux.y))
    water.x[1:-1, :] = flux.x[1:-1, :] * np.where(flux.x[1:-1, :] >= 0, F[:-1, :], F[1:, :])
    water.y[:, 1:-1] = flux.y[:, 1:-1] * np.where(flux.y[:, 1:-1] >= 0, F[:, :-1], F[:, 1:])
    if flux.ne is not None:
        water.ne = flux.ne * np.where(flux.ne >= 0, F[:-1, :-1], F[1:, 1:])
        water.nw = flux.nw * np.where(flux.nw >= 0, F[1:, :-1], F[:-1, 1:])

    C = 0.0
    eps_max = 0.0
    eps = None
    if visc.enabled and current.has_history:
        E = compute_wlr(current, current.dt_prev, grid)
        if visc.mask_wells:
            _mask_well_corners(E, wells)
        eps = epsilon_faces(E)
        fx, fy = interior_face_masks(grid)
        eps.x_values[~fx] = 0.0
        eps.y_values[~fy] = 0.0
        eps_max = eps.max_abs()
        if visc.C_override is not None:
            C = float(visc.C_override)
        else:
            C = viscosity_coefficient(eps_max, grid, dt, visc.alpha)
    diffusion_number = C * eps_max * dt / grid.dx**2
    if visc.enabled and visc.C_override is None and C > 0.0:
        bound = (1.0 + (grid.dy / grid.dx) ** 2) / visc.alpha
        assert diffusion_number <= bound * (1.0 + 1e-12), (diffusion_number, bound)

    free = act & ~inj
    substeps = 1
    if C > 0.0:
        kx = C * eps.x_values * grid.dy / grid.dx
        ky = C * eps.y_values * grid.dx / grid.dy
        # sum of the diffusion numbers of a cell's four faces
        load = dt / V * (kx[:-1, :] + kx[1:, :] + ky[:, :-1] + ky[:, 1:])
        peak = float(load[free].max()) if free.any() else 0.0
        if peak > 1.0:
            # explicit diffusion alone would be unstable: sub-cycle it after the advective update
            substeps = int(np.ceil(peak / DIFFUSION_SUBSTEP_LOAD))
        if substeps == 1:
            water.x[1:-1, :] -= kx[1:-1, :] * (S[1:, :] - S[:-1, :])
            water.y[:, 1:-1] -= ky[:, 1:-1] * (S[:, 1:] - S[:, :-1])

    net_water = water.net_outflow() + prod_rate * F
    S_new = S.copy()
    S_new[free] = S[free] - dt / V * net_water[free]
    S_new[inj] = 1.0
    if substeps > 1:
        h = dt / substeps
        for _ in range(substeps):
            dfx = np.zeros_like(water.x)
            dfy = np.zeros_like(water.y)
            dfx[1:-1, :] = -kx[1:-1, :] * (S_new[1:, :] - S_new[:-1, :])
            dfy[:, 1:-1] = -ky[:, 1:-1] * (S_new[:, 1:] - S_new[:, :-1])
            net = FluxField(grid, dfx, dfy).net_outflow()
            S_new[free] -= h / V * net[free]
            # time-averaged link rates keep the mass ledger exact
            water.x += dfx / substeps
            water.y += dfy / substeps

    # telescoped boundary terms, computed link by link
    injected = 0.0
    boundary = 0.0
    transfer = 0.0
    ring = ~act
    for src, dst, w in _links(water):
        transfer += np.abs(w[free[src] & free[dst]]).sum()
        s_inj, d_inj = inj[src], inj[dst]
        s_free, d_free = free[src], free[dst]
        s_out, d_out = ring[src], ring[dst]
        injected += w[s_inj & d_free].sum() - w[d_inj & s_free].sum()
        boundary += w[s_free & d_out].sum() - w[d_free & s_out].sum()
    produced = float((prod_rate * F)[free].sum())
    dV = float(V * (S_new[free] - S[free]).sum())
    mass = MassRecord(
        dV=dV,
        injected=dt * injected,
        boundary_outflow=dt * boundary,
        produced=dt * produced,
        transfer=dt * transfer,
    )

    new_state = TransportState(
        t=state.t + dt,
        S_curr=CellField(grid, S_new),
        S_prev=state.S_curr,
        f_prev=f_c,
        g_prev=g_c,
        dt_prev=dt,
        step=state.step + 1,
    )
    info = StepInfo(
        dt=dt,
        C=C,
        eps_max=eps_max,
        diffusion_number=diffusion_number,
        mass=mass,
        S_max=float(S_new[act].max()),
        S_min=float(S_new[act].min()),
        eps=eps,
        diffusion_substeps=substeps,
    )
    return new_state, info


def producer_outflow(flux: FluxField, wells) -> np.ndarray:
    """Rate leaving through each producer cell: its net inflow over the links."""
    _, prod = _well_masks(flux.grid, wells)
    return np.where(prod, np.maximum(-flux.net_outflow(), 0.0), 0.0)
