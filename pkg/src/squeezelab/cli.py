"""Command-line front end.

Subcommands
-----------
simulate     run a config's shot pipeline and persist CSV + noise + manifest
analyze      apply estimators (with bootstrap CIs) to a shots CSV
scan         sweep one knob of a config: tomography angle, readout phase,
             or interrogation time
reproduce    regenerate a named benchmark dataset (see ``reproduce --list``)
loss-floor   trajectory scan of attainable squeezing under atom loss

Shared flags: ``--config <path>``, ``--seed <u64>``, ``--shots <n>``,
``--workers <n>``, ``--out <dir>``.  The default output root is the
``SQUEEZELAB_OUT`` environment variable, falling back to ``./squeezelab_out``.

Exit codes: 0 success; 2 configuration/input error; 3 runtime or numerical
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, reproduce as repro, scans
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, NumericalError
from .magnetometry import T_PI_SWAP
from .pipeline import analyze_csv, run_simulation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

OUT_ENV_VAR = "SQUEEZELAB_OUT"
DEFAULT_OUT = "squeezelab_out"


def _out_root(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV_VAR, DEFAULT_OUT))


def _load_run_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("this command needs --config <path>")
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=int(args.seed))
    if args.shots is not None:
        if args.shots < 1:
            raise ConfigError(f"--shots must be >= 1, got {args.shots}")
        config = replace(config, n_shots=int(args.shots))
    return config


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, default=float))


# --- subcommands ------------------------------------------------------------


def _cmd_simulate(args) -> int:
    config = _load_run_config(args)
    result = run_simulation(config, workers=args.workers, out_root=_out_root(args))
    _print_json(
        {
            "run_id": result.run_id,
            "run_dir": str(result.run_dir),
            "shots_csv": str(result.csv_path),
            "manifest": str(result.manifest_path),
            "n_shots": len(result.records),
            "n_sites": result.records[0].n_sites,
        }
    )
    return EXIT_OK


def _cmd_analyze(args) -> int:
    spec = {}
    if args.spec:
        spec_path = Path(args.spec)
        try:
            spec = json.loads(spec_path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read analysis spec {spec_path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"analysis spec {spec_path} is not valid JSON: "
                f"line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    seed = int(args.seed) if args.seed is not None else 0
    results = analyze_csv(args.shots_csv, spec, seed=seed)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        out_path = out_dir / "analysis.json"
        out_path.write_text(json.dumps(results, indent=2, sort_keys=True, default=float) + "\n")
        print(str(out_path))
    else:
        _print_json(results)
    return EXIT_OK


def _parse_values(raw: str, what: str) -> list[float]:
    try:
        values = [float(v) for v in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad --values for {what}: {exc}") from None
    if not values:
        raise ConfigError(f"--values for {what} is empty")
    return values


def _cmd_scan(args) -> int:
    config = _load_run_config(args)
    out_dir = _out_root(args) / f"scan_{args.kind}"
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "tomography":
        values = _parse_values(args.values or "-90,-60,-30,-15,0,15,30,60,90", "tomography")
        scan = scans.tomography_scan(config, values, workers=args.workers)
        table = scan.table()
        summary = {
            "r_squared": scan.curve.r_squared,
            "alpha_min_deg": scan.curve.alpha_min_deg,
        }
    elif args.kind == "fringe":
        values = _parse_values(args.values or "0,30,60,90,120,150,180,210,240,270,300,330", "fringe")
        scan = scans.fringe_scan(config, values, workers=args.workers)
        table = scan.table()
        summary = {
            "visibility": scan.fit.visibility,
            "visibility_err": scan.fit.visibility_err,
        }
    else:  # sensitivity over interrogation times (seconds)
        values = _parse_values(args.values or "", "sensitivity") if args.values else [342e-6]
        t_pi = float(config.sequence.get("t_pi_s", T_PI_SWAP))
        holds = []
        for t_int in values:
            hold = t_int - 2.0 * t_pi
            if hold <= 0:
                raise ConfigError(
                    f"interrogation time {t_int} s is shorter than the two swap pulses (2 x {t_pi} s)"
                )
            holds.append(hold)
        scan = scans.sensitivity_scan(config, holds, workers=args.workers)
        table = scan.table()
        scan.detail_table().write_csv(out_dir / "detail.csv")
        first = scan.points[0]
        summary = {
            "sigma_b_T": first.sigma_b,
            "sql_T": first.sql,
            "enhancement": first.enhancement,
        }
    path = table.write_csv(out_dir / "scan.csv")
    _print_json({"kind": args.kind, "csv": str(path), **summary})
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    if args.list:
        for name in repro.available_targets():
            print(name)
        return EXIT_OK
    if not args.target:
        raise ConfigError(
            f"missing target; available: {', '.join(repro.available_targets())}"
        )
    summary = repro.reproduce(
        args.target,
        _out_root(args),
        shots=args.shots,
        seed=args.seed,
        workers=args.workers,
    )
    _print_json(summary)
    return EXIT_OK


def _cmd_loss_floor(args) -> int:
    times = np.linspace(args.t_min, args.t_max, args.n_times)
    n_traj = args.shots if args.shots is not None else 500
    seed = args.seed if args.seed is not None else 77
    scan = scans.loss_floor_scan(times, n_trajectories=n_traj, master_seed=seed)
    out_dir = _out_root(args) / "loss_floor"
    out_dir.mkdir(parents=True, exist_ok=True)
    path = scan.table().write_csv(out_dir / "loss_floor.csv")
    _print_json(
        {
            "floor_db": scan.floor_db,
            "floor_time_s": scan.floor_time,
            "n_trajectories": n_traj,
            "csv": str(path),
        }
    )
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run-config JSON path")
    parser.add_argument("--seed", type=int, help="master seed override (u64)")
    parser.add_argument("--shots", type=int, help="shot/trajectory count override")
    parser.add_argument("--workers", type=int, default=1, help="process count (default 1)")
    parser.add_argument("--out", help=f"output root (default ${OUT_ENV_VAR} or ./{DEFAULT_OUT})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squeezelab",
        description="Lattice spin-squeezing simulator and analysis chain",
    )
    parser.add_argument("--version", action="version", version=f"squeezelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a config and persist shot records")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="estimate squeezing figures from a shots CSV")
    p.add_argument("shots_csv", help="path to a shots CSV")
    p.add_argument("--spec", help="analysis-spec JSON path (default: standard estimators)")
    _add_common(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("scan", help="sweep one knob of a config")
    p.add_argument("kind", choices=("tomography", "fringe", "sensitivity"))
    p.add_argument("--values", help="comma/space-separated sweep values "
                   "(degrees for tomography/fringe, seconds for sensitivity)")
    _add_common(p)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("reproduce", help="regenerate a benchmark dataset")
    p.add_argument("target", nargs="?", help="dataset tag (see --list)")
    p.add_argument("--list", action="store_true", help="list available targets")
    _add_common(p)
    p.set_defaults(func=_cmd_reproduce)

    p = sub.add_parser("loss-floor", help="squeezing-vs-time trajectory scan under loss")
    p.add_argument("--t-min", type=float, default=0.002, help="first evolution time (s)")
    p.add_argument("--t-max", type=float, default=0.044, help="last evolution time (s)")
    p.add_argument("--n-times", type=int, default=22, help="number of time points")
    _add_common(p)
    p.set_defaults(func=_cmd_loss_floor)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 — CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
