"""Run and sweep orchestration plus the text file formats.

Files written by :func:`run` into its output directory::

    config.txt          flat ``key = value`` echo of the run configuration
    S_t<time>_step<k>.txt  one saturation snapshot per requested time
    report.txt          final metrics, one ``name = value`` per line
    manifest.json       configuration, snapshot index with checksums, timing

Snapshot files start with ``key = value`` header lines followed by ``ny``
rows of ``nx`` values; row ``j`` holds the cells ``(0..nx-1, j)``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from goeflow import __version__
from goeflow.diagnostics import EmptyFrontError, GoeReport, goe_report, scheme_discrepancy
from goeflow.grid import CellField
from goeflow.pressure import PressureSolveError
from goeflow.scenarios import ScenarioConfig, analytic_front_radius, build_scenario
from goeflow.simulate import simulate
from goeflow.transport import CFLError

logger = logging.getLogger(__name__)

SNAPSHOT_DIGITS = 17

# keys accepted in config files, with their parsers
CONFIG_KEYS = {
    "scenario": str,
    "n": int,
    "M": float,
    "scheme": str,
    "viscosity": str,
    "alpha": float,
    "t_end": float,
    "snapshots": str,
    "Q": float,
    "phi": float,
    "length": float,
    "dt_coeff": float,
    "dt_power": float,
    "mask_wells": str,
    "diagonal_transport": str,
}


class RunError(RuntimeError):
    """A run failed; ``category`` is one of ``solver``, ``cfl``, ``io``, ``config``."""

    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


# ---------------------------------------------------------------------------
# run parameters <-> scenario configs


def _on(value) -> bool:
    return str(value).strip().lower() in ("on", "true", "1", "yes")


def config_from_params(params: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from flat parameters (CLI flags or a config file)."""
    p = dict(params)
    missing = [k for k in ("scenario", "n", "M", "scheme", "viscosity") if p.get(k) is None]
    if missing:
        raise RunError("config", f"missing parameters: {', '.join(missing)}")
    kw = {}
    for key in ("alpha", "t_end", "Q", "phi", "length"):
        if p.get(key) is not None:
            kw[key] = float(p[key])
    cfg = build_scenario(str(p["scenario"]), int(p["n"]), float(p["M"]), str(p["scheme"]), _on(p["viscosity"]), **kw)
    snaps = p.get("snapshots")
    if snaps not in (None, ""):
        times = tuple(float(s) for s in str(snaps).split(",") if s.strip())
        cfg = cfg.replace(snapshot_times=times)
    changes = {}
    for key in ("dt_coeff", "dt_power"):
        if p.get(key) is not None:
            changes[key] = float(p[key])
    if p.get("diagonal_transport") is not None:
        changes["diagonal_transport"] = _on(p["diagonal_transport"])
    if p.get("mask_wells") is not None:
        import dataclasses

        changes["visc"] = dataclasses.replace(cfg.visc, mask_wells=_on(p["mask_wells"]))
    if changes:
        cfg = cfg.replace(**changes)
    return cfg


def config_params(cfg: ScenarioConfig) -> dict:
    """Flat parameters that rebuild ``cfg`` exactly through :func:`config_from_params`."""
    return {
        "scenario": cfg.name,
        "n": cfg.n,
        "M": cfg.model.M,
        "scheme": cfg.scheme,
        "viscosity": "on" if cfg.visc.enabled else "off",
        "alpha": cfg.visc.alpha,
        "t_end": cfg.t_end,
        "snapshots": ",".join(repr(float(t)) for t in cfg.snapshot_times),
        "Q": cfg.Q,
        "phi": cfg.phi,
        "length": cfg.length,
        "dt_coeff": cfg.dt_coeff,
        "dt_power": cfg.dt_power,
        "mask_wells": "on" if cfg.visc.mask_wells else "off",
        "diagonal_transport": "on" if cfg.diagonal_transport else "off",
    }


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_config(path: str | os.PathLike, params: dict) -> None:
    lines = [f"{k} = {_fmt(v)}" for k, v in params.items() if v is not None]
    Path(path).write_text("\n".join(lines) + "\n")


def read_config(path: str | os.PathLike) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RunError("config", f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise RunError("config", f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise RunError("config", f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


# ---------------------------------------------------------------------------
# snapshots


def snapshot_header(cfg: ScenarioConfig, t: float, step: int) -> dict:
    return {
        "n": cfg.n,
        "nx": cfg.grid.nx,
        "ny": cfg.grid.ny,
        "dx": cfg.grid.dx,
        "t": t,
        "step": step,
        "M": cfg.model.M,
        "scheme": cfg.scheme,
        "alpha": cfg.visc.alpha,
        "viscosity": "on" if cfg.visc.enabled else "off",
        "field": "S",
    }


def write_snapshot(path: str | os.PathLike, values: np.ndarray, header: dict, digits: int = SNAPSHOT_DIGITS) -> None:
    lines = [f"{k} = {_fmt(v)}" for k, v in header.items()]
    fmt = f"{{:.{digits}g}}"
    for j in range(values.shape[1]):
        lines.append(" ".join(fmt.format(float(v)) for v in values[:, j]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path: str | os.PathLike) -> tuple[dict, np.ndarray]:
    header: dict[str, str] = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            header[k] = v
        else:
            rows.append([float(x) for x in line.split()])
    values = np.array(rows, dtype=float).T
    nx, ny = int(header.get("nx", values.shape[0])), int(header.get("ny", values.shape[1]))
    if values.shape != (nx, ny):
        raise RunError("io", f"{path}: table shape {values.shape} does not match header {(nx, ny)}")
    return header, values


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# run


@dataclass
class RunManifest:
    config: dict
    code_version: str
    snapshots: list[dict] = field(default_factory=list)
    report: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    steps: int = 0
    max_mass_residual: float = 0.0
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | os.PathLike) -> RunManifest:
        return cls(**json.loads(Path(path).read_text()))


def report_for(cfg: ScenarioConfig, S: CellField, mass_residuals) -> GoeReport:
    rf = analytic_front_radius(cfg.Q, cfg.phi, cfg.t_end)
    return goe_report(S, cfg.center, rf, mass_residuals)


def run(config: ScenarioConfig, out: str | os.PathLike, progress_every: int = 0) -> RunManifest:
    """Simulate ``config`` and write config, snapshots, report and manifest into ``out``."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_config(out / "config.txt", config_params(config))
    except OSError as exc:
        raise RunError("io", f"cannot write to {out}: {exc}") from exc

    written: list[dict] = []

    def on_snapshot(t: float, step: int, S: CellField) -> None:
        name = f"S_t{t:.6f}_step{step:07d}.txt"
        path = out / name
        try:
            write_snapshot(path, S.values, snapshot_header(config, t, step))
        except OSError as exc:
            raise RunError("io", f"cannot write snapshot {path}: {exc}") from exc
        written.append({"file": name, "t": t, "step": step, "sha256": _sha256(path)})

    start = time.perf_counter()
    try:
        result = simulate(config, progress_every=progress_every, on_snapshot=on_snapshot)
    except PressureSolveError as exc:
        raise RunError("solver", str(exc)) from exc
    except CFLError as exc:
        raise RunError("cfl", str(exc)) from exc
    wall = time.perf_counter() - start

    residuals = [s.mass.residual for s in result.steps]
    manifest = RunManifest(
        config=config_params(config),
        code_version=__version__,
        snapshots=written,
        wall_clock=wall,
        steps=result.state.step,
        max_mass_residual=max(residuals, default=0.0),
        notes=list(config.notes),
    )
    try:
        rep = report_for(config, result.S, residuals)
        manifest.report = rep.__dict__.copy()
        (out / "report.txt").write_text(rep.to_text())
    except EmptyFrontError as exc:
        manifest.notes.append(f"no front: {exc}")
    try:
        (out / "manifest.json").write_text(manifest.to_json())
    except OSError as exc:
        raise RunError("io", f"cannot write manifest: {exc}") from exc
    return manifest


def rerun(manifest_path: str | os.PathLike, out: str | os.PathLike) -> RunManifest:
    """Re-run the configuration recorded in a manifest."""
    m = RunManifest.load(manifest_path)
    return run(config_from_params(m.config), out)


# ---------------------------------------------------------------------------
# sweep

SUMMARY_KEYS = ("scenario", "scheme", "n", "M", "viscosity", "alpha")
SUMMARY_COLUMNS = SUMMARY_KEYS + (
    "status",
    "steps",
    "circularity",
    "radius_mean",
    "radius_analytic",
    "front_width",
    "overshoot",
    "undershoot",
    "mass_residual",
    "scheme_discrepancy_L1",
    "run_dir",
)


def run_dir_name(cfg: ScenarioConfig) -> str:
    visc = "on" if cfg.visc.enabled else "off"
    return f"{cfg.name}_{cfg.scheme}_n{cfg.n}_M{cfg.model.M:g}_{visc}_a{cfg.visc.alpha:g}"


def _sweep_one(params: dict, out: str) -> dict:
    row = {k: params.get(k) for k in ("scenario", "scheme", "n", "M", "viscosity", "alpha")}
    try:
        cfg = config_from_params(params)
        row.update(scenario=cfg.name, scheme=cfg.scheme, n=cfg.n, M=cfg.model.M, alpha=cfg.visc.alpha)
        run_dir = Path(out) / run_dir_name(cfg)
        m = run(cfg, run_dir)
        row.update(status="ok", steps=m.steps, run_dir=str(run_dir))
        row.update({k: m.report.get(k) for k in SUMMARY_COLUMNS if k in m.report})
    except (RunError, ValueError, OSError) as exc:
        category = getattr(exc, "category", "error")
        row["status"] = f"failed[{category}]: {exc}"
    return row


def _row_key(row: dict) -> tuple:
    return tuple(str(row.get(k)) for k in SUMMARY_KEYS)


def sweep(matrix: list[ScenarioConfig], out: str | os.PathLike, parallelism: int = 1) -> list[dict]:
    """Run every configuration and tabulate the final reports.

    One failing run yields a ``failed`` row and does not stop the others.
    Rows are sorted by (scenario, scheme, n, M, viscosity, alpha); the
    five-point/nine-point discrepancy is filled in for matching pairs.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    params = [config_params(c) for c in matrix]
    if not params:
        rows: list[dict] = []
    elif parallelism <= 1:
        rows = [_sweep_one(p, str(out)) for p in params]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(_sweep_one, params, [str(out)] * len(params)))
    _fill_discrepancy(rows)
    rows.sort(key=_row_key)
    write_summary(out / "summary.csv", rows)
    return rows


def _fill_discrepancy(rows: list[dict]) -> None:
    by_case: dict[tuple, dict[str, dict]] = {}
    for r in rows:
        if r.get("status") != "ok":
            continue
        case = (r["scenario"], r["n"], r["M"], r["viscosity"])
        by_case.setdefault(case, {})[r["scheme"]] = r
    for pair in by_case.values():
        if "5p" in pair and "9p" in pair:
            a = _final_field(pair["5p"])
            b = _final_field(pair["9p"])
            d = scheme_discrepancy(a, b)
            pair["5p"]["scheme_discrepancy_L1"] = d
            pair["9p"]["scheme_discrepancy_L1"] = d


def _final_field(row: dict) -> CellField:
    run_dir = Path(row["run_dir"])
    m = RunManifest.load(run_dir / "manifest.json")
    cfg = config_from_params(m.config)
    last = max(m.snapshots, key=lambda s: s["t"])
    _, values = read_snapshot(run_dir / last["file"])
    return CellField(cfg.grid, values)


def write_summary(path: str | os.PathLike, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(SUMMARY_COLUMNS), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k) for k in SUMMARY_COLUMNS})


def figure_matrix(
    scenario: str = "radial",
    ns=(21, 41, 81),
    Ms=(1.0, 10.0, 50.0),
    schemes=("5p", "9p"),
    viscosity: bool = False,
    **kw,
) -> list[ScenarioConfig]:
    """Scheme x grid x viscosity-ratio matrix matching one figure panel grid."""
    return [
        build_scenario(scenario, n, M, s, viscosity, **kw) for M in Ms for n in ns for s in schemes
    ]
