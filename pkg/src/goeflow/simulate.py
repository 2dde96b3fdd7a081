"""IMPES time loop: pressure solve, link rates, step size, saturation update."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from goeflow.grid import CellField, FluxField
from goeflow.pressure import PressureSolver, assemble
from goeflow.scenarios import ScenarioConfig
from goeflow.transport import StepInfo, TransportState, advance, producer_outflow, stable_time_step

logger = logging.getLogger(__name__)


@dataclass
class SimulationResult:
    config: ScenarioConfig
    state: TransportState
    snapshots: list[tuple[float, int, CellField]] = field(default_factory=list)
    steps: list[StepInfo] = field(default_factory=list)
    last_pressure: CellField | None = None
    last_flux: FluxField | None = None

    @property
    def S(self) -> CellField:
        return self.state.S_curr

    @property
    def max_mass_residual(self) -> float:
        return max((s.mass.residual for s in self.steps), default=0.0)


def pressure_step(config: ScenarioConfig, S: CellField, hint: FluxField | None, solver: PressureSolver):
    system = assemble(
        config.grid, S, config.model, config.wells, config.scheme, hint, config.boundary_pressure
    )
    P = solver.solve(system)
    flux = system.fluxes(P)
    if not config.diagonal_transport and flux.has_diagonals:
        flux = FluxField(flux.grid, flux.x, flux.y)
    return system, P, flux


def simulate(
    config: ScenarioConfig,
    *,
    progress_every: int = 0,
    on_snapshot=None,
    tol: float = 1e-10,
    keep_steps: bool = True,
) -> SimulationResult:
    """Run ``config`` to ``t_end`` and collect the requested snapshots.

    A snapshot is taken at the step whose time is closest to each requested
    time. The final step is shortened to land on ``t_end`` exactly.
    """
    state = TransportState.initial(config.initial_saturation())
    result = SimulationResult(config, state)
    pending = sorted(set(config.snapshot_times))
    pinned = np.zeros(config.grid.shape, dtype=bool)
    for c in config.injector_cells:
        pinned[c] = True

    def emit(prev_t: float | None, prev_S: CellField | None, step: int) -> None:
        # choose, for each pending time passed by this step, the nearer of the two levels
        while pending and (pending[0] <= state.t + 1e-12 * max(1.0, config.t_end)):
            target = pending.pop(0)
            if prev_S is not None and abs(prev_t - target) < abs(state.t - target):
                snap = (prev_t, step - 1, prev_S)
            else:
                snap = (state.t, step, state.S_curr)
            result.snapshots.append(snap)
            if on_snapshot is not None:
                on_snapshot(*snap)

    emit(None, None, 0)
    solver = PressureSolver(tol)
    hint = None
    if config.t_end > 0:
        # a first solve with averaged mobilities fixes the upstream directions
        _, _, hint = pressure_step(config, state.S_curr, None, solver)
    t_end = config.t_end
    while state.t < t_end and not np.isclose(state.t, t_end, rtol=1e-14, atol=0.0):
        system, P, flux = pressure_step(config, state.S_curr, hint, solver)
        prod_out = producer_outflow(flux, config.wells)
        dt = stable_time_step(
            flux, config.model, config.phi, pinned, config.dt_coeff, config.dt_power, prod_out
        )
        dt = min(dt, t_end - state.t)
        prev_t, prev_S = state.t, state.S_curr
        state, info = advance(state, flux, config.model, config.visc, dt, config.wells, config.phi)
        if keep_steps:
            result.steps.append(info)
        hint = flux
        result.last_pressure, result.last_flux = P, flux
        if progress_every and state.step % progress_every == 0:
            logger.info(
                "step %d t=%.6g dt=%.3e eps_max=%.3e C=%.3e overshoot=%.3e",
                state.step, state.t, dt, info.eps_max, info.C, max(info.S_max - 1.0, -info.S_min, 0.0),
            )
        result.state = state
        emit(prev_t, prev_S, state.step)
    result.state = state
    emit(None, None, state.step)
    return result
