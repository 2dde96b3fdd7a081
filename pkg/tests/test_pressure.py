import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from goeflow.flux_model import FluidModel
from goeflow.grid import CellField, FaceField, build_grid
from goeflow.pressure import (
    PressureSolveError,
    PressureSolver,
    WellSpec,
    assemble,
    face_mobilities,
    face_velocity,
    solve,
)
from goeflow.scenarios import radial_scenario


def _columns_problem(n, scheme, M=1.0, S=None, left=1.0, right=0.0):
    g = build_grid(n, n, 1.0, 1.0)
    wells = [WellSpec((0, j), "producer", pressure=left) for j in range(n)]
    wells += [WellSpec((n - 1, j), "producer", pressure=right) for j in range(n)]
    S = CellField.full(g, 0.3) if S is None else S
    return g, assemble(g, S, FluidModel(M), wells, scheme)


@pytest.mark.parametrize("scheme", ["5p", "9p"])
def test_linear_in_x(scheme):
    g, system = _columns_problem(9, scheme)
    P = solve(system).values
    X, _ = g.cell_centers()
    exact = (X[-1] - X) / (X[-1] - X[0])
    assert np.abs(P - exact).max() < 1e-9
    # every row is the same function of x
    assert np.abs(P - P[:, :1]).max() < 1e-12


@pytest.mark.parametrize("scheme", ["5p", "9p"])
def test_constant_dirichlet_gives_constant(scheme):
    g, system = _columns_problem(7, scheme, M=5.0, left=2.5, right=2.5)
    P = solve(system).values
    assert np.allclose(P, 2.5, rtol=0, atol=1e-12)


def test_three_by_three_hand_solution():
    # one unknown (the centre) linked to four Dirichlet neighbours and an injector
    g = build_grid(3, 3, 1.0, 1.0)
    wells = [WellSpec((1, 1), "injector", rate=4.0)]
    wells += [WellSpec(c, "producer", pressure=0.0) for c in [(0, 1), (2, 1), (1, 0), (1, 2)]]
    wells += [WellSpec(c, "producer", pressure=0.0) for c in [(0, 0), (2, 0), (0, 2), (2, 2)]]
    sys5 = assemble(g, CellField.full(g, 0.0), FluidModel(1.0), wells, "5p")
    assert sys5.matrix.shape == (1, 1)
    P = solve(sys5).values
    assert P[1, 1] == pytest.approx(1.0, abs=1e-15)
    # nine-point: 4 * 2/3 + 4 * 1/6 = 10/3 total transmissibility
    sys9 = assemble(g, CellField.full(g, 0.0), FluidModel(1.0), wells, "9p")
    assert solve(sys9).values[1, 1] == pytest.approx(4.0 / (10.0 / 3.0), abs=1e-15)


@pytest.mark.parametrize("scheme", ["5p", "9p"])
def test_matrix_structure(scheme):
    cfg = radial_scenario(21, 10.0, scheme)
    rng = np.random.default_rng(3)
    S = CellField(cfg.grid, rng.uniform(0, 1, cfg.grid.shape))
    system = assemble(cfg.grid, S, cfg.model, cfg.wells, scheme, None, 0.0)
    A = system.matrix.tocsr()
    assert abs(A - A.T).max() < 1e-15
    off = A - __import__("scipy").sparse.diags(A.diagonal())
    assert off.max() <= 0.0
    assert (A.diagonal() > 0).all()
    nnz_row = np.diff(A.indptr)
    assert nnz_row.max() <= (5 if scheme == "5p" else 9)
    # rows away from Dirichlet data and wells sum to zero
    near_dirichlet = np.zeros(cfg.grid.shape, dtype=bool)
    d = system.dirichlet_mask
    p = np.pad(d, 1)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            near_dirichlet |= p[1 + di : 1 + di + d.shape[0], 1 + dj : 1 + dj + d.shape[1]]
    rows = system.unknown_index[system.unknown_mask & ~near_dirichlet]
    sums = np.asarray(A.sum(axis=1)).ravel()
    assert np.abs(sums[rows]).max() < 1e-13


def test_nine_point_with_zero_diagonal_weight_is_five_point():
    cfg = radial_scenario(21, 10.0, "9p")
    S = CellField(cfg.grid, np.random.default_rng(1).uniform(0, 1, cfg.grid.shape))
    a = assemble(cfg.grid, S, cfg.model, cfg.wells, "5p", None, 0.0).matrix
    b = assemble(cfg.grid, S, cfg.model, cfg.wells, "9p", None, 0.0, diagonal_weight=0.0).matrix
    np.testing.assert_array_equal(a.indptr, b.indptr)
    np.testing.assert_array_equal(a.indices, b.indices)
    assert np.abs(a.data - b.data).max() <= 1e-14


def test_assemble_errors():
    g = build_grid(5, 5, 1.0, 1.0)
    S = CellField.full(g, 0.0)
    with pytest.raises(PressureSolveError):
        assemble(g, S, FluidModel(), [WellSpec((2, 2), "injector", rate=1.0)], "5p")
    cfg = radial_scenario(21, 1.0)
    with pytest.raises(ValueError):
        assemble(cfg.grid, cfg.initial_saturation(), cfg.model, [WellSpec((0, 0), "producer")], "5p", None, 0.0)
    rect = build_grid(5, 6, 1.0, 1.0)
    with pytest.raises(ValueError):
        assemble(rect, CellField.full(rect, 0.0), FluidModel(), [WellSpec((0, 0), "producer")], "9p")
    with pytest.raises(ValueError):
        assemble(g, S, FluidModel(), [WellSpec((0, 0), "producer")], "5p", diagonal_weight=0.5)
    with pytest.raises(ValueError):
        WellSpec((1, 1), "injector", rate=0.0)


@pytest.mark.parametrize("scheme", ["5p", "9p"])
def test_tolerance_self_consistency(scheme):
    cfg = radial_scenario(41, 10.0, scheme)
    S = CellField(cfg.grid, np.random.default_rng(7).uniform(0, 1, cfg.grid.shape))
    system = assemble(cfg.grid, S, cfg.model, cfg.wells, scheme, None, 0.0)
    p10 = solve(system, tol=1e-10)
    p12 = solve(system, tol=1e-12)
    assert system.residual(p10) <= 1e-10
    assert np.abs(p10.values - p12.values).max() < 1e-8
    q = PressureSolver(tol=1e-12).solve(system)
    assert np.abs(q.values - p12.values).max() < 1e-9


def test_solver_is_deterministic_and_reuses_factors():
    cfg = radial_scenario(21, 10.0, "9p")
    rng = np.random.default_rng(0)
    fields = [CellField(cfg.grid, rng.uniform(0, 1, cfg.grid.shape)) for _ in range(3)]
    runs = []
    for _ in range(2):
        solver = PressureSolver()
        runs.append([solver.solve(assemble(cfg.grid, S, cfg.model, cfg.wells, "9p", None, 0.0)).values for S in fields])
    for a, b in zip(*runs):
        np.testing.assert_array_equal(a, b)


def test_face_velocity_constant_and_linear():
    g = build_grid(6, 6, 1.0, 1.0)
    S = CellField.full(g, 0.5)
    m = FluidModel(1.0)
    v = face_velocity(CellField.full(g, 3.0), g, S, m)
    assert v.max_abs() == 0.0
    X, _ = g.cell_centers()
    v = face_velocity(CellField(g, -2.0 * X), g, S, m)
    np.testing.assert_allclose(v.x_values[1:-1, :], 2.0)
    np.testing.assert_allclose(v.y_values, 0.0, atol=1e-15)


def test_upstream_mobility_follows_hint():
    g = build_grid(4, 3, 1.0, 1.0)
    S = CellField(g, np.array([[1.0] * 3, [0.0] * 3, [1.0] * 3, [0.0] * 3]))
    m = FluidModel(10.0)
    hint = FaceField(g, np.ones((5, 3)), np.zeros((4, 4)))
    mx, _ = face_mobilities(g, S, m, hint)
    np.testing.assert_allclose(mx[1, :], 1.0)  # upstream cell (0, j) has S = 1
    np.testing.assert_allclose(mx[2, :], 0.1)
    hint = FaceField(g, -np.ones((5, 3)), np.zeros((4, 4)))
    mx, _ = face_mobilities(g, S, m, hint)
    np.testing.assert_allclose(mx[1, :], 0.1)
    mx, _ = face_mobilities(g, S, m, None)
    np.testing.assert_allclose(mx[1, :], 0.55)


def _log_profile_error(scheme):
    cfg = radial_scenario(81, 1.0, scheme)
    system = assemble(cfg.grid, cfg.initial_saturation(), cfg.model, cfg.wells, scheme, None, 0.0)
    P = solve(system).values
    X, Y = cfg.grid.cell_centers()
    r = np.hypot(X - cfg.center[0], Y - cfg.center[1])
    R, dx = cfg.domain_radius, cfg.grid.dx
    m = cfg.grid.active_mask & (r > 5 * dx) & (r < R - 5 * dx)
    basis = np.log(R / r[m])
    A = basis @ P[m] / (basis @ basis)
    fit = A * basis
    return np.linalg.norm(P[m] - fit) / np.linalg.norm(fit), A


@pytest.mark.parametrize("scheme", ["5p", "9p"])
def test_radial_log_profile(scheme):
    err, A = _log_profile_error(scheme)
    assert err < 0.05
    # continuum point-source strength Q / (2 pi)
    assert A == pytest.approx(1.0 / (2 * np.pi), rel=0.03)


@pytest.mark.parametrize("scheme", ["5p", "9p"])
def test_conservation_and_symmetry(scheme):
    cfg = radial_scenario(41, 1.0, scheme)
    system = assemble(cfg.grid, cfg.initial_saturation(), cfg.model, cfg.wells, scheme, None, 0.0)
    P = solve(system)
    flux = system.fluxes(P)
    div = flux.net_outflow()
    inner = cfg.grid.active_mask.copy()
    inner[cfg.wells[0].cell] = False
    assert np.abs(div[inner]).max() < 1e-8 * cfg.Q
    assert div[cfg.wells[0].cell] == pytest.approx(cfg.Q, rel=1e-9)
    v = P.values
    for t in (np.rot90(v), v.T, v[::-1, :], v[:, ::-1]):
        assert np.abs(t - v).max() < 1e-9
    # any box around the injector passes the whole rate (five-point faces)
    if scheme == "5p":
        k = cfg.wells[0].cell[0]
        # boxes that stay inside the active disk
        for h in (1, 4, 9, 13):
            lo, hi = k - h, k + h
            out = (
                flux.x[hi + 1, lo : hi + 1].sum()
                - flux.x[lo, lo : hi + 1].sum()
                + flux.y[lo : hi + 1, hi + 1].sum()
                - flux.y[lo : hi + 1, lo].sum()
            )
            assert out == pytest.approx(cfg.Q, rel=1e-6)


@given(c=st.floats(-5, 5), scale=st.floats(0.1, 10))
def test_pressure_is_affine_in_boundary_data(c, scale):
    g, base = _columns_problem(6, "9p", M=3.0, left=1.0, right=0.0)
    _, shifted = _columns_problem(6, "9p", M=3.0, left=scale + c, right=c)
    p0 = solve(base).values
    p1 = solve(shifted).values
    np.testing.assert_allclose(p1, c + scale * p0, atol=1e-9 * max(1.0, abs(c) + scale))
