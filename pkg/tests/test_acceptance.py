"""Acceptance criteria 1-10, one test each.

Every test records a ``criterion k: PASS|FAIL`` line (printed in the pytest
terminal summary) before asserting. The scenario runs are shared through the
session cache in ``conftest.py``; the full suite simulates fourteen 81x81 cases.
"""

from __future__ import annotations

import numpy as np
import pytest

from goeflow.diagnostics import front_width, goe_report, scheme_discrepancy
from goeflow.flux_model import FluidModel, entropy_condition_check
from goeflow.grid import CellField, build_grid
from goeflow.pressure import assemble, solve
from goeflow.scenarios import analytic_front_radius, build_scenario, radial_scenario
from goeflow.transport import TransportState, compute_wlr, time_step, viscosity_coefficient

NS = (21, 41, 81)


def record(log, k: int, checks: dict[str, bool], detail: str) -> None:
    ok = all(checks.values())
    failed = [name for name, good in checks.items() if not good]
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} | {detail}"
    if failed:
        line += f" | failed checks: {', '.join(failed)}"
    log.append(line)
    print(line)
    assert ok, line


def _report(res):
    cfg = res.config
    rf = analytic_front_radius(cfg.Q, cfg.phi, res.state.t)
    return goe_report(res.S, cfg.center, rf, [s.mass.residual for s in res.steps])


def _d4_error(v):
    return max(np.abs(t - v).max() for t in (np.rot90(v), np.rot90(v, 2), np.rot90(v, 3), v.T, v[::-1, :], v[:, ::-1]))


def test_criterion_1_unit_ratio_control(run_case, acceptance_log):
    checks, parts = {}, []
    disc = []
    for n in NS:
        a, b = run_case("radial", n, 1.0, "5p", False), run_case("radial", n, 1.0, "9p", False)
        disc.append(scheme_discrepancy(a.S, b.S))
        for scheme, res in (("5p", a), ("9p", b)):
            rep = _report(res)
            dx = res.config.grid.dx
            checks[f"radius n={n} {scheme}"] = abs(rep.radius_mean - rep.radius_analytic) <= 1.5 * dx
            if n == 81:
                checks[f"circularity n=81 {scheme}"] = rep.circularity <= 0.08
                parts.append(f"circ81[{scheme}]={rep.circularity:.4f}")
            parts.append(f"|r-rf|/dx[{scheme},{n}]={abs(rep.radius_mean - rep.radius_analytic) / dx:.2f}")
    checks["discrepancy decreasing"] = disc[0] > disc[1] > disc[2]
    checks["discrepancy n=81 <= 0.02"] = disc[2] <= 0.02
    parts.append("disc=" + "/".join(f"{d:.4f}" for d in disc))
    record(acceptance_log, 1, checks, " ".join(parts))


def test_criterion_2_goe_appears(run_case, acceptance_log):
    checks, parts = {}, []
    for scheme in ("5p", "9p"):
        c10 = _report(run_case("radial", 81, 10.0, scheme, False)).circularity
        c1 = _report(run_case("radial", 81, 1.0, scheme, False)).circularity
        checks[f"circularity ratio {scheme}"] = c10 >= 3 * c1
        parts.append(f"circ81[{scheme}] M10={c10:.4f} M1={c1:.4f} ratio={c10 / c1:.1f}")
    d10, d1 = [], []
    for n in NS:
        for M, out in ((10.0, d10), (1.0, d1)):
            out.append(
                scheme_discrepancy(run_case("radial", n, M, "5p", False).S, run_case("radial", n, M, "9p", False).S)
            )
        checks[f"disc M10 >= M1 at n={n}"] = d10[-1] >= d1[-1]
    parts.append("disc M10=" + "/".join(f"{d:.4f}" for d in d10) + " M1=" + "/".join(f"{d:.4f}" for d in d1))
    record(acceptance_log, 2, checks, " ".join(parts))


def test_criterion_3_goe_suppressed(run_case, acceptance_log):
    checks, parts = {}, []
    runs = {}
    for scheme, alpha in (("5p", 67.0), ("9p", 400.0)):
        res = runs[scheme] = run_case("radial", 81, 10.0, scheme, True)
        cfg = res.config
        checks[f"alpha {scheme}"] = cfg.alpha == alpha and cfg.visc.enabled
        # every step but the clipped last one uses the power-law step
        dts = np.array([s.dt for s in res.steps[:-1]])
        checks[f"dt rule {scheme}"] = bool(np.allclose(dts, time_step(cfg.grid.dx), rtol=1e-12))
        rep = _report(res)
        checks[f"circularity {scheme}"] = rep.circularity <= 0.08
        checks[f"radius {scheme}"] = abs(rep.radius_mean - rep.radius_analytic) <= 0.1 * rep.radius_analytic
        parts.append(
            f"circ81[{scheme}]={rep.circularity:.4f} r={rep.radius_mean:.4f} rf={rep.radius_analytic:.4f}"
        )
    on = scheme_discrepancy(runs["5p"].S, runs["9p"].S)
    off = scheme_discrepancy(run_case("radial", 81, 10.0, "5p", False).S, run_case("radial", 81, 10.0, "9p", False).S)
    checks["discrepancy halved"] = on <= 0.5 * off
    parts.append(f"disc on={on:.4f} off={off:.4f} ratio={on / off:.3f}")
    record(acceptance_log, 3, checks, " ".join(parts))


def test_criterion_4_front_sharpens(run_case, acceptance_log):
    checks, parts = {}, []
    for scheme in ("5p", "9p"):
        widths = []
        for n in NS:
            res = run_case("radial", n, 10.0, scheme, True)
            widths.append(front_width(res.S, res.config.center, (1.0, 0.0)))
        checks[f"monotone {scheme}"] = widths[0] > widths[1] > widths[2]
        parts.append(f"width[{scheme}]=" + "/".join(f"{w:.4f}" for w in widths))
    record(acceptance_log, 4, checks, " ".join(parts))


def test_criterion_5_five_spot(run_case, acceptance_log):
    checks, parts = {}, []
    fields = {}
    for visc in (False, True):
        for scheme in ("5p", "9p"):
            res = run_case("five-spot", 81, 10.0, scheme, visc)
            if visc:
                expect = {"5p": 7.0, "9p": 40.0}[scheme]
                checks[f"alpha {scheme}"] = res.config.alpha == expect
            fields[visc, scheme] = res.S
            err = _d4_error(res.S.values)
            checks[f"D4 {scheme} visc={'on' if visc else 'off'}"] = err <= 1e-10
            parts.append(f"d4[{scheme},{'on' if visc else 'off'}]={err:.1e}")
    on = scheme_discrepancy(fields[True, "5p"], fields[True, "9p"])
    off = scheme_discrepancy(fields[False, "5p"], fields[False, "9p"])
    checks["discrepancy halved"] = on <= 0.5 * off
    parts.append(f"disc on={on:.4f} off={off:.4f} ratio={on / off:.3f}")
    record(acceptance_log, 5, checks, " ".join(parts))


def _wlr_state(S0, S1, f0, f1, g0, g1):
    return TransportState(t=0.0, S_curr=S1, S_prev=S0, f_curr=f1, g_curr=g1, f_prev=f0, g_prev=g0, dt_prev=1.0)


def test_criterion_6_wlr_oracle(acceptance_log):
    checks, worst = {}, 0.0
    for nx, ny, lx, ly in ((12, 12, 1.0, 1.0), (15, 9, 1.5, 0.6)):
        g = build_grid(nx, ny, lx, ly)
        X, _ = g.cell_centers()
        S = CellField(g, np.random.default_rng(nx).uniform(size=g.shape))
        zero = CellField.full(g, 0.0)
        for a in (1.0, -2.25, 7.0):
            f = CellField(g, a * X)
            for dt in (1e-3, 0.3, 2.0):
                E = compute_wlr(_wlr_state(S, S, f, f, zero, zero), dt).values[2 : nx - 1, :]
                expected = 2 * a * g.dx * g.dy * dt / max(dt, g.dx, g.dy)
                worst = max(worst, np.abs(E / expected - 1).max())
    checks["linear flux oracle"] = worst <= 1e-12

    g = build_grid(10, 10, 1.0, 1.0)
    c = CellField.full(g, 0.42)
    fc = CellField.full(g, -1.3)
    checks["constant data"] = np.abs(compute_wlr(_wlr_state(c, c, fc, fc, fc, fc), 0.01).values).max() == 0.0

    rng = np.random.default_rng(99)
    lin = 0.0
    for _ in range(50):
        A = [CellField(g, rng.normal(size=(10, 10))) for _ in range(6)]
        B = [CellField(g, rng.normal(size=(10, 10))) for _ in range(6)]
        AB = [CellField(g, x.values + y.values) for x, y in zip(A, B)]
        ea, eb, eab = (compute_wlr(_wlr_state(*z), 0.05).values for z in (A, B, AB))
        lin = max(lin, np.abs(eab - ea - eb).max() / max(1.0, np.abs(ea).max(), np.abs(eb).max()))
    checks["linearity"] = lin <= 1e-13
    record(acceptance_log, 6, checks, f"oracle rel err={worst:.1e} linearity err={lin:.1e}")


def test_criterion_7_viscosity_coefficient(acceptance_log):
    g = build_grid(10, 10, 1.0, 1.0)
    c = viscosity_coefficient(0.5, g, 0.01, 4.0)
    checks = {"C == 1": c == 1.0}
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 300))
        grid = build_grid(n, n, float(rng.uniform(0.1, 10)), float(rng.uniform(0.1, 10)))
        eps, dt, alpha = rng.uniform(1e-6, 10), rng.uniform(1e-6, 1), rng.uniform(0.5, 500)
        k = rng.uniform(0.1, 10)
        c1 = viscosity_coefficient(eps, grid, dt, alpha)
        ck = viscosity_coefficient(eps, grid, dt, k * alpha)
        worst = max(worst, abs(ck * k / c1 - 1))
    checks["C proportional to 1/alpha"] = worst <= 1e-14
    record(acceptance_log, 7, checks, f"C={c!r} max rel dev of C*alpha={worst:.1e}")


ALL_RUNS = (
    [("radial", n, M, s, False) for n in NS for M in (1.0, 10.0) for s in ("5p", "9p")]
    + [("radial", n, 10.0, s, True) for n in NS for s in ("5p", "9p")]
    + [("five-spot", 81, 10.0, s, v) for s in ("5p", "9p") for v in (False, True)]
)


def test_criterion_8_conservation(run_case, acceptance_log):
    worst_mass, worst_flux = 0.0, 0.0
    for key in ALL_RUNS:
        res = run_case(*key)
        cfg = res.config
        worst_mass = max(worst_mass, res.max_mass_residual)
        div = res.last_flux.net_outflow()
        free = cfg.grid.active_mask.copy()
        for w in cfg.wells:
            free[w.cell] = False
        worst_flux = max(worst_flux, np.abs(div[free]).max() / cfg.Q)
    checks = {"mass residual <= 1e-10": worst_mass <= 1e-10, "flux imbalance <= 1e-8 Q": worst_flux <= 1e-8}
    record(
        acceptance_log, 8, checks, f"{len(ALL_RUNS)} runs: max mass residual={worst_mass:.1e} max imbalance/Q={worst_flux:.1e}"
    )


def test_criterion_9_entropy_gate(acceptance_log):
    quad = entropy_condition_check(FluidModel(1.0, "quadratic"), 1.0, 0.0)
    s_shape = entropy_condition_check(FluidModel(1.0, "s-shaped"), 1.0, 0.0)
    # brute-force oracle on a 1e-3 grid
    F = FluidModel(1.0, "s-shaped").fractional_flow
    S = np.arange(1, 1000) / 1000.0
    brute = bool(np.all((1 - F(S)) / (1 - S) >= 1.0 - 1e-12))
    checks = {"quadratic admissible": quad, "s-shaped rejected": not s_shape, "brute force agrees": brute == s_shape}
    record(acceptance_log, 9, checks, f"F=S^2 -> {quad}, S-shaped -> {s_shape}")


def test_criterion_10_log_profile(acceptance_log):
    checks, parts = {}, []
    for scheme in ("5p", "9p"):
        cfg = radial_scenario(81, 1.0, scheme)
        system = assemble(cfg.grid, cfg.initial_saturation(), cfg.model, cfg.wells, scheme, None, 0.0)
        P = solve(system).values
        X, Y = cfg.grid.cell_centers()
        r = np.hypot(X - cfg.center[0], Y - cfg.center[1])
        R, dx = cfg.domain_radius, cfg.grid.dx
        m = cfg.grid.active_mask & (r > 5 * dx) & (r < R - 5 * dx)
        basis = np.log(R / r[m])
        A = basis @ P[m] / (basis @ basis)
        err = np.linalg.norm(P[m] - A * basis) / np.linalg.norm(A * basis)
        pointwise = np.abs(P[m] / (A * basis) - 1).max()
        checks[f"profile error {scheme}"] = err < 0.05
        parts.append(f"{scheme}: L2 rel err={err:.4f} (pointwise max {pointwise:.3f}) A={A:.4f}")
    record(acceptance_log, 10, checks, " ".join(parts))
