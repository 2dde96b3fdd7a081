"""Command-line entry point: ``goeflow run`` and ``goeflow sweep``.

Exit codes: 0 success, 2 bad arguments/config, 3 pressure solver failure,
4 CFL violation, 5 I/O failure, 6 one or more sweep rows failed.
"""

from __future__ import annotations

import argparse
import logging
import sys

from goeflow.runner import RunError, config_from_params, figure_matrix, read_config, run, sweep

EXIT_CODES = {"config": 2, "solver": 3, "cfl": 4, "io": 5, "sweep": 6}


def _add_case_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override its values")
    p.add_argument("--scenario", choices=["radial", "five-spot"])
    p.add_argument("--M", type=float, help="viscosity ratio mu_o / mu_w")
    p.add_argument("--viscosity", choices=["on", "off"])
    p.add_argument("--alpha", type=float, help="override the scenario's alpha preset")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--length", type=float, help="domain side length")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--progress", type=int, default=0, metavar="N", help="log progress every N steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goeflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one configuration")
    _add_case_flags(p_run)
    p_run.add_argument("--n", type=int, help="cells per side")
    p_run.add_argument("--scheme", choices=["5p", "9p"])
    p_run.add_argument("--snapshots", help="comma-separated snapshot times")

    p_sweep = sub.add_parser("sweep", help="run a scheme x grid x M matrix and tabulate reports")
    _add_case_flags(p_sweep)
    p_sweep.add_argument("--n", default="21,41,81", help="comma list of grid sizes")
    p_sweep.add_argument("--Ms", default=None, help="comma list of viscosity ratios (default 1,10,50)")
    p_sweep.add_argument("--schemes", default="5p,9p")
    p_sweep.add_argument("--parallelism", type=int, default=1)
    return parser


def _params(args: argparse.Namespace, keys) -> dict:
    params = read_config(args.config) if args.config else {}
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def _cmd_run(args: argparse.Namespace) -> int:
    params = _params(args, ("scenario", "n", "M", "scheme", "viscosity", "alpha", "t_end", "snapshots", "length"))
    try:
        cfg = config_from_params(params)
    except ValueError as exc:
        raise RunError("config", str(exc)) from exc
    m = run(cfg, args.out, progress_every=args.progress)
    print(f"{args.out}: {m.steps} steps in {m.wall_clock:.2f}s", file=sys.stderr)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    params = _params(args, ("scenario", "M", "viscosity", "alpha", "t_end", "length"))
    try:
        ns = [int(s) for s in str(args.n).split(",")]
        if args.Ms is not None:
            Ms = [float(s) for s in args.Ms.split(",")]
        elif "M" in params:
            Ms = [float(params["M"])]
        else:
            Ms = [1.0, 10.0, 50.0]
        schemes = [s.strip() for s in args.schemes.split(",")]
        kw = {k: float(params[k]) for k in ("alpha", "t_end", "length") if k in params}
        matrix = figure_matrix(
            params.get("scenario", "radial"),
            ns,
            Ms,
            schemes,
            str(params.get("viscosity", "off")) == "on",
            **kw,
        )
    except ValueError as exc:
        raise RunError("config", str(exc)) from exc
    rows = sweep(matrix, args.out, args.parallelism)
    failed = [r for r in rows if r.get("status") != "ok"]
    for r in failed:
        print(f"failed: {r}", file=sys.stderr)
    print(f"{args.out}/summary.csv: {len(rows)} rows, {len(failed)} failed", file=sys.stderr)
    return EXIT_CODES["sweep"] if failed else 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except RunError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)


if __name__ == "__main__":
    sys.exit(main())
