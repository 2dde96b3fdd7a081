"""Elliptic pressure equation ``div(lambda_T grad P) + q = 0`` on the active cells.

Both stencils are written as a network of two-point links. The five-point
scheme uses the four axial links; the nine-point scheme scales those by
``1 - w`` and adds the diagonal links of the grid rotated by 45 degrees,
scaled by ``w`` (``w = 1/3`` on square cells gives the classical
``(4 * axial + diagonal - 20 * centre) / 6`` Laplacian).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from goeflow.flux_model import FluidModel
from goeflow.grid import CellField, FaceField, FluxField, GridSpec

SCHEMES = ("5p", "9p")
NINE_POINT_DIAGONAL_WEIGHT = 1.0 / 3.0


class PressureSolveError(RuntimeError):
    """Pressure system is singular or the solve missed its tolerance."""


@dataclass(frozen=True)
class WellSpec:
    """Single-cell well: rate-controlled injector or pressure-controlled producer."""

    cell: tuple[int, int]
    kind: str = "injector"
    rate: float = 0.0
    pressure: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("injector", "producer"):
            raise ValueError(f"unknown well kind {self.kind!r}")
        if self.kind == "injector" and not self.rate > 0:
            raise ValueError("injector rate must be positive")
        object.__setattr__(self, "cell", (int(self.cell[0]), int(self.cell[1])))


def normalize_scheme(scheme: str) -> str:
    s = str(scheme).lower()
    if s not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected 5p or 9p")
    return s


@dataclass(eq=False)
class PressureSystem:
    grid: GridSpec
    scheme: str
    matrix: sp.csr_matrix
    rhs: np.ndarray
    unknown_index: np.ndarray  # -1 where the cell is not an unknown
    dirichlet_mask: np.ndarray
    dirichlet_values: np.ndarray
    tx: np.ndarray
    ty: np.ndarray
    tne: np.ndarray | None
    tnw: np.ndarray | None
    mob_x: np.ndarray
    mob_y: np.ndarray
    wells: tuple[WellSpec, ...] = field(default=())

    @property
    def unknown_mask(self) -> np.ndarray:
        return self.unknown_index >= 0

    def fluxes(self, P: CellField) -> FluxField:
        """Link rates implied by ``P``, using exactly the assembled transmissibilities."""
        p = P.values
        qx = np.zeros_like(self.tx)
        qy = np.zeros_like(self.ty)
        qx[1:-1, :] = self.tx[1:-1, :] * (p[:-1, :] - p[1:, :])
        qy[:, 1:-1] = self.ty[:, 1:-1] * (p[:, :-1] - p[:, 1:])
        ne = nw = None
        if self.tne is not None:
            ne = self.tne * (p[:-1, :-1] - p[1:, 1:])
            nw = self.tnw * (p[1:, :-1] - p[:-1, 1:])
        return FluxField(self.grid, qx, qy, ne, nw)

    def residual(self, P: CellField) -> float:
        x = P.values[self.unknown_mask]
        return _relative_residual(self.matrix, x, self.rhs)


def _relative_residual(A, x, b) -> float:
    r = np.linalg.norm(A @ x - b)
    nb = np.linalg.norm(b)
    return float(r / nb) if nb > 0 else float(r)


def _live_links(grid: GridSpec, domain: np.ndarray):
    """Masks of links whose two cells are in the pressure domain, at least one active."""
    act = grid.active_mask
    lx = np.zeros((grid.nx + 1, grid.ny), dtype=bool)
    ly = np.zeros((grid.nx, grid.ny + 1), dtype=bool)
    lx[1:-1, :] = domain[:-1, :] & domain[1:, :] & (act[:-1, :] | act[1:, :])
    ly[:, 1:-1] = domain[:, :-1] & domain[:, 1:] & (act[:, :-1] | act[:, 1:])
    lne = domain[:-1, :-1] & domain[1:, 1:] & (act[:-1, :-1] | act[1:, 1:])
    lnw = domain[1:, :-1] & domain[:-1, 1:] & (act[1:, :-1] | act[:-1, 1:])
    return lx, ly, lne, lnw


def face_mobilities(
    grid: GridSpec,
    S: CellField,
    model: FluidModel,
    upwind_hint: FaceField | FluxField | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Single-point upstream total mobility on every interior axial face.

    The upstream side is read from the sign of ``upwind_hint`` (the previous
    step's velocities). Without a hint, or where the hint is exactly zero,
    the arithmetic mean of the two cells is used.
    """
    lam = model.total_mobility(S.values)
    mx = np.zeros((grid.nx + 1, grid.ny))
    my = np.zeros((grid.nx, grid.ny + 1))
    left, right = lam[:-1, :], lam[1:, :]
    down, up = lam[:, :-1], lam[:, 1:]
    mx[1:-1, :] = 0.5 * (left + right)
    my[:, 1:-1] = 0.5 * (down + up)
    if upwind_hint is not None:
        if isinstance(upwind_hint, FluxField):
            hx, hy = upwind_hint.x, upwind_hint.y
        else:
            hx, hy = upwind_hint.x_values, upwind_hint.y_values
        hx, hy = hx[1:-1, :], hy[:, 1:-1]
        mx[1:-1, :] = np.where(hx > 0, left, np.where(hx < 0, right, mx[1:-1, :]))
        my[:, 1:-1] = np.where(hy > 0, down, np.where(hy < 0, up, my[:, 1:-1]))
    return mx, my


def assemble(
    grid: GridSpec,
    S: CellField,
    model: FluidModel,
    wells: list[WellSpec] | tuple[WellSpec, ...],
    scheme: str = "5p",
    upwind_hint: FaceField | FluxField | None = None,
    boundary_pressure: float | None = None,
    diagonal_weight: float | None = None,
) -> PressureSystem:
    """Build the linear system for the cell pressures.

    ``boundary_pressure`` fixes the pressure on the boundary ring (the
    inactive cells touching the active region); producers fix the pressure
    of their own cell. At least one of the two must be present.
    ``diagonal_weight`` overrides the nine-point diagonal share.
    """
    scheme = normalize_scheme(scheme)
    if diagonal_weight is None:
        diagonal_weight = NINE_POINT_DIAGONAL_WEIGHT if scheme == "9p" else 0.0
    if not 0.0 <= diagonal_weight <= 1.0:
        raise ValueError("diagonal weight must lie in [0, 1]")
    if scheme == "5p" and diagonal_weight != 0.0:
        raise ValueError("the five-point scheme has no diagonal links")
    if scheme == "9p" and not grid.is_square:
        raise ValueError("the nine-point scheme requires square cells (dx == dy)")

    act = grid.active_mask
    dmask = np.zeros(grid.shape, dtype=bool)
    dvals = np.zeros(grid.shape)
    if boundary_pressure is not None:
        ring = grid.ring_mask
        dmask |= ring
        dvals[ring] = boundary_pressure
    rhs_src = np.zeros(grid.shape)
    for w in wells:
        i, j = w.cell
        if not (0 <= i < grid.nx and 0 <= j < grid.ny) or not act[i, j]:
            raise ValueError(f"well cell {w.cell} is not an active cell")
        if w.kind == "producer":
            dmask[i, j] = True
            dvals[i, j] = w.pressure
        else:
            rhs_src[i, j] += w.rate
    if not dmask.any():
        raise PressureSolveError("singular pressure system: no boundary pressure or producer")

    domain = act | dmask
    unknown = act & ~dmask
    index = np.full(grid.shape, -1, dtype=np.int64)
    index[unknown] = np.arange(int(unknown.sum()))
    n = int(unknown.sum())

    lx, ly, lne, lnw = _live_links(grid, domain)
    mob_x, mob_y = face_mobilities(grid, S, model, upwind_hint)
    axial_w = 1.0 - diagonal_weight
    tx = np.where(lx, axial_w * mob_x * grid.dy / grid.dx, 0.0)
    ty = np.where(ly, axial_w * mob_y * grid.dx / grid.dy, 0.0)
    tne = tnw = None
    if diagonal_weight > 0.0:
        lam = model.total_mobility(S.values)
        geo = diagonal_weight * grid.dx * grid.dy / (grid.dx**2 + grid.dy**2)
        tne = np.where(lne, geo * 0.5 * (lam[:-1, :-1] + lam[1:, 1:]), 0.0)
        tnw = np.where(lnw, geo * 0.5 * (lam[1:, :-1] + lam[:-1, 1:]), 0.0)

    ii, jj = np.indices(grid.shape)
    links = [
        (ii[:-1, :], jj[:-1, :], ii[1:, :], jj[1:, :], tx[1:-1, :]),
        (ii[:, :-1], jj[:, :-1], ii[:, 1:], jj[:, 1:], ty[:, 1:-1]),
    ]
    if tne is not None:
        links.append((ii[:-1, :-1], jj[:-1, :-1], ii[1:, 1:], jj[1:, 1:], tne))
        links.append((ii[1:, :-1], jj[1:, :-1], ii[:-1, 1:], jj[:-1, 1:], tnw))

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    np.add.at(rhs, index[unknown], rhs_src[unknown])
    for pi, pj, qi, qj, t in links:
        keep = t > 0
        if not keep.any():
            continue
        t = t[keep]
        p = index[pi[keep], pj[keep]]
        q = index[qi[keep], qj[keep]]
        both = (p >= 0) & (q >= 0)
        rows += [p[both], q[both], p[both], q[both]]
        cols += [p[both], q[both], q[both], p[both]]
        vals += [t[both], t[both], -t[both], -t[both]]
        # one end fixed: eliminate it into the right-hand side
        for a, b, ai, aj, bi, bj in ((p, q, pi, pj, qi, qj), (q, p, qi, qj, pi, pj)):
            sel = (a >= 0) & (b < 0)
            if sel.any():
                rows.append(a[sel])
                cols.append(a[sel])
                vals.append(t[sel])
                pd = dvals[bi[keep][sel], bj[keep][sel]]
                np.add.at(rhs, a[sel], t[sel] * pd)
    if rows:
        A = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()
    else:
        A = sp.csr_matrix((n, n))
    A.sum_duplicates()
    A.sort_indices()
    return PressureSystem(
        grid=grid,
        scheme=scheme,
        matrix=A,
        rhs=rhs,
        unknown_index=index,
        dirichlet_mask=dmask,
        dirichlet_values=dvals,
        tx=tx,
        ty=ty,
        tne=tne,
        tnw=tnw,
        mob_x=mob_x,
        mob_y=mob_y,
        wells=tuple(wells),
    )


def solve(system: PressureSystem, tol: float = 1e-10, max_refinements: int = 5) -> CellField:
    """Direct sparse solve with iterative refinement up to ``tol`` relative residual.

    Cells outside the pressure domain get 0; Dirichlet cells get their data.
    """
    A, b = system.matrix, system.rhs
    values = system.dirichlet_values.copy()
    unknown = system.unknown_mask
    if b.size:
        if np.any(A.diagonal() <= 0):
            raise PressureSolveError("singular pressure system: isolated unknown cell")
        try:
            lu = splu(A.tocsc())
        except RuntimeError as exc:
            raise PressureSolveError(f"pressure matrix factorization failed: {exc}") from exc
        x = lu.solve(b)
        res = _relative_residual(A, x, b)
        k = 0
        while res > tol and k < max_refinements:
            x = x + lu.solve(b - A @ x)
            res = _relative_residual(A, x, b)
            k += 1
        if not np.all(np.isfinite(x)) or res > tol:
            raise PressureSolveError(f"pressure solve missed tolerance {tol:g}: residual {res:.3e}")
        values[unknown] = x
    return CellField(system.grid, values)


def face_velocity(
    P: CellField,
    grid: GridSpec,
    S: CellField,
    model: FluidModel,
    upwind_hint: FaceField | FluxField | None = None,
    boundary_pressure: float | None = None,
) -> FaceField:
    """Two-point Darcy velocity ``-lambda_face * dP/dn`` on every axial face.

    Faces joining two cells outside the active region (or touching a cell
    outside the pressure domain) carry zero velocity.
    """
    act = grid.active_mask
    domain = act.copy()
    if boundary_pressure is not None:
        domain |= grid.ring_mask
    lx, ly, _, _ = _live_links(grid, domain)
    # producer cells are active, so all their links are already live
    mob_x, mob_y = face_mobilities(grid, S, model, upwind_hint)
    p = P.values
    u = np.zeros((grid.nx + 1, grid.ny))
    v = np.zeros((grid.nx, grid.ny + 1))
    u[1:-1, :] = -mob_x[1:-1, :] * (p[1:, :] - p[:-1, :]) / grid.dx
    v[:, 1:-1] = -mob_y[:, 1:-1] * (p[:, 1:] - p[:, :-1]) / grid.dy
    return FaceField(grid, np.where(lx, u, 0.0), np.where(ly, v, 0.0))


class PressureSolver:
    """Repeated solves for slowly changing systems of one sparsity pattern.

    Keeps the LU factors of an earlier matrix and uses them to precondition
    conjugate gradients (the operator is symmetric positive definite). The
    factors are rebuilt when CG needs more than ``refactor_after``
    iterations or the pattern changes. Deterministic for a fixed sequence
    of systems.
    """

    def __init__(self, tol: float = 1e-10, refactor_after: int = 6, max_iter: int = 200):
        self.tol = tol
        self.refactor_after = refactor_after
        self.max_iter = max_iter
        self._lu = None
        self._n = -1
        self._x = None
        self.factorizations = 0
        self.last_iterations = 0

    def _factor(self, A) -> None:
        try:
            self._lu = splu(
                A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True}
            )
        except RuntimeError as exc:
            raise PressureSolveError(f"pressure matrix factorization failed: {exc}") from exc
        self._n = A.shape[0]
        self.factorizations += 1

    def solve(self, system: PressureSystem) -> CellField:
        A, b = system.matrix, system.rhs
        values = system.dirichlet_values.copy()
        if b.size == 0:
            return CellField(system.grid, values)
        if np.any(A.diagonal() <= 0):
            raise PressureSolveError("singular pressure system: isolated unknown cell")
        if self._lu is None or self._n != A.shape[0]:
            self._factor(A)
            self._x = None
        x, iters, res = self._pcg(A, b, self._x)
        if res > self.tol or iters > self.refactor_after:
            self._factor(A)
            x, iters2, res = self._pcg(A, b, x)
            iters += iters2
        if not np.all(np.isfinite(x)) or res > self.tol:
            raise PressureSolveError(f"pressure solve missed tolerance {self.tol:g}: residual {res:.3e}")
        self.last_iterations = iters
        self._x = x
        values[system.unknown_mask] = x
        return CellField(system.grid, values)

    def _pcg(self, A, b, x0):
        nb = np.linalg.norm(b)
        target = self.tol * 0.1 * (nb if nb > 0 else 1.0)
        x = self._lu.solve(b) if x0 is None else x0.copy()
        r = b - A @ x
        k = 0
        rn = np.linalg.norm(r)
        if rn > target:
            z = self._lu.solve(r)
            p = z.copy()
            rz = r @ z
            while k < self.max_iter:
                Ap = A @ p
                a = rz / (p @ Ap)
                x += a * p
                r -= a * Ap
                k += 1
                rn = np.linalg.norm(r)
                if rn <= target:
                    break
                z = self._lu.solve(r)
                rz_new = r @ z
                p = z + (rz_new / rz) * p
                rz = rz_new
        return x, k, _relative_residual(A, x, b)
