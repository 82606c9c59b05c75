"""zonesim command line.

Exit codes: 0 success, 1 runtime failure, 2 invalid building description,
64 usage error (bad flag, missing input file).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

from . import __version__
from .engine import SimulationConfig, SimulationError, simulate
from .model import BuildingFileError, dump_building, load_building, validate_building
from .scenarios import (
    CollectorParams,
    HoleSchedule,
    TrombeParams,
    antananarivo_july,
    build_collector,
    build_trombe,
    collector_weather,
    run_collector,
    run_trombe,
    shipped_weather_path,
)
from .weather import WeatherFileError, load_weather, write_weather

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2
EXIT_USAGE = 64

HOLES = {"open": HoleSchedule.OPEN, "closed": HoleSchedule.CLOSED, "night-closed": HoleSchedule.NIGHT_CLOSED}

# short sweep names for the commonly varied fields
ALIASES = {
    "collector": {"flow": "flow_rate", "area": "aperture_area", "gap": "gap_thickness"},
    "trombe": {"thickness": "wall_thickness", "holes": "hole_area", "ach": "ach"},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zonesim", description="Multizone building thermal/airflow/humidity simulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, days, warmup):
        p.add_argument("--dt", type=float, default=3600.0, help="time step in seconds (default 3600)")
        p.add_argument("--days", type=int, default=days, help="days to record after warmup")
        p.add_argument("--warmup", type=int, default=warmup, help="warmup days, not recorded")
        p.add_argument("--out", help="CSV output path (stdout if omitted)")
        p.add_argument("--outputs", help="comma separated output columns")

    p = sub.add_parser("validate", help="check a building description")
    p.add_argument("building", nargs="?")
    p.add_argument("--building", dest="building_opt")

    p = sub.add_parser("simulate", help="run a building against a weather file")
    p.add_argument("--building", required=True)
    p.add_argument("--weather", required=True)
    common(p, days=0, warmup=2)

    p = sub.add_parser("collector", help="flat-plate air collector scenario")
    p.add_argument("--flow", type=float, default=CollectorParams.flow_rate, help="air flow, m3/h")
    common(p, days=2, warmup=2)

    p = sub.add_parser("trombe", help="Trombe wall and room scenario")
    p.add_argument("--holes", choices=list(HOLES), default="open")
    common(p, days=7, warmup=5)

    p = sub.add_parser("sweep", help="vary one scenario parameter")
    p.add_argument("scenario", choices=["collector", "trombe"])
    p.add_argument("parameter")
    p.add_argument("values", help="comma separated values")
    p.add_argument("--holes", choices=list(HOLES), default="open")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--dt", type=float, default=3600.0)
    p.add_argument("--days", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--out")

    p = sub.add_parser("emit", help="write a scenario's building JSON and weather CSV")
    p.add_argument("scenario", choices=["collector", "trombe"])
    p.add_argument("--building", required=True)
    p.add_argument("--weather", required=True)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--dt", type=float, default=3600.0)
    return parser


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _outputs(arg: str | None) -> tuple[str, ...] | None:
    if not arg:
        return None
    return tuple(s.strip() for s in arg.split(",") if s.strip())


def _write_series(series, out: str | None) -> None:
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(series.header())
        for row in series.data:
            w.writerow([format(float(v), ".10g") for v in row])
    else:
        series.to_csv(out)


def _write_meta(out: str | None, args: argparse.Namespace, started: float, **extra) -> None:
    if out is None:
        return
    meta = {"command": args.command, "zonesim_version": __version__,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "elapsed_s": round(time.time() - started, 3),
            "arguments": {k: v for k, v in vars(args).items() if k != "command"}}
    meta.update(extra)
    Path(f"{out}.meta.json").write_text(json.dumps(meta, indent=2, default=str) + "\n", encoding="utf-8")


def _print_violations(violations) -> None:
    for v in violations:
        print(f"{v.where}: {v.message}")


def cmd_validate(args) -> int:
    path = args.building_opt or args.building
    if not path:
        raise UsageError("validate needs a building file")
    try:
        model = load_building(_existing(path))
    except BuildingFileError as exc:
        print(exc)
        return EXIT_INVALID
    violations = validate_building(model)
    if violations:
        _print_violations(violations)
        return EXIT_INVALID
    print(f"{path}: ok ({len(model.zones)} zones, {len(model.walls)} walls, "
          f"{len(model.glazings)} glazings, {len(model.links)} links)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.time()
    building, weather_path = _existing(args.building), _existing(args.weather)
    try:
        model = load_building(building)
    except BuildingFileError as exc:
        print(exc)
        return EXIT_INVALID
    violations = validate_building(model)
    if violations:
        _print_violations(violations)
        return EXIT_INVALID
    weather = load_weather(weather_path, args.dt)
    if args.days:
        per_day = int(round(86400.0 / args.dt))
        weather = weather[:per_day * (args.days + args.warmup)]
    config = SimulationConfig(dt=args.dt, warmup_days=args.warmup, outputs=_outputs(args.outputs))
    series = simulate(model, weather, config)
    _write_series(series, args.out)
    _write_meta(args.out, args, started, steps=len(series))
    return EXIT_OK


def cmd_collector(args) -> int:
    started = time.time()
    params = CollectorParams(flow_rate=args.flow)
    series, metrics = run_collector(params, days=args.days, warmup_days=args.warmup, dt=args.dt,
                                    outputs=_outputs(args.outputs) or ("time_h", "T_ae", "T_air:gap"))
    _write_series(series, args.out)
    print(f"P_u={metrics.p_u:.2f}W eff={100 * metrics.efficiency:.2f}% dT={metrics.delta_t:.2f}K",
          file=sys.stderr if args.out is None else sys.stdout)
    _write_meta(args.out, args, started, p_u_w=metrics.p_u, efficiency=metrics.efficiency)
    return EXIT_OK


def cmd_trombe(args) -> int:
    started = time.time()
    params = TrombeParams(hole_schedule=HOLES[args.holes])
    kw = {"outputs": _outputs(args.outputs)} if args.outputs else {}
    run = run_trombe(params, days=args.days, warmup_days=args.warmup, dt=args.dt, **kw)
    _write_series(run.series, args.out)
    eff = run.efficiency
    print(f"E={run.delivered_energy(args.dt) / 1000:.3f}kWh eff={100 * eff:.2f}%" if eff is not None
          else f"E={run.delivered_energy(args.dt) / 1000:.3f}kWh eff=n/a",
          file=sys.stderr if args.out is None else sys.stdout)
    _write_meta(args.out, args, started, delivered_wh=run.delivered_energy(args.dt), efficiency=eff)
    return EXIT_OK


def _sweep_point(task):
    scenario, field_name, value, holes, dt, days, warmup = task
    if scenario == "collector":
        params = replace(CollectorParams(), **{field_name: value})
        _, m = run_collector(params, days=days or 2, warmup_days=2 if warmup is None else warmup, dt=dt,
                             outputs=("time_h", "T_ae", "T_air:gap"))
        return [value, m.p_u, m.efficiency, m.delta_t]
    params = replace(TrombeParams(hole_schedule=HOLES[holes]), **{field_name: value})
    run = run_trombe(params, days=days or 7, warmup_days=5 if warmup is None else warmup, dt=dt)
    eff = run.efficiency
    return [value, run.delivered_energy(dt), float("nan") if eff is None else eff,
            run.phase_lag(int(round(86400.0 / dt))) * dt / 3600.0]


def cmd_sweep(args) -> int:
    started = time.time()
    cls = CollectorParams if args.scenario == "collector" else TrombeParams
    field_name = ALIASES[args.scenario].get(args.parameter, args.parameter)
    numeric = {f.name for f in fields(cls) if f.type in ("float", "int", float, int)}
    if field_name not in numeric:
        raise UsageError(f"{args.scenario} has no numeric parameter {args.parameter!r}; "
                         f"choose from {', '.join(sorted(numeric | set(ALIASES[args.scenario])))}")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad value list {args.values!r}") from None
    if not values:
        raise UsageError("empty value list")
    tasks = [(args.scenario, field_name, v, args.holes, args.dt, args.days, args.warmup) for v in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))  # map keeps declared order
    else:
        rows = [_sweep_point(t) for t in tasks]
    header = ([args.parameter, "P_u [W]", "efficiency [-]", "delta_T [K]"] if args.scenario == "collector"
              else [args.parameter, "delivered [Wh]", "efficiency [-]", "lag [h]"])
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(float(v), ".10g") for v in row])
    finally:
        if args.out:
            fh.close()
    _write_meta(args.out, args, started, rows=len(rows))
    return EXIT_OK


def cmd_emit(args) -> int:
    if args.scenario == "collector":
        params = CollectorParams()
        dump_building(build_collector(params), args.building)
        write_weather(collector_weather(params, args.days, args.dt), args.weather)
    else:
        dump_building(build_trombe(TrombeParams()), args.building)
        if args.days == 7 and args.dt == 3600.0:
            Path(args.weather).write_bytes(shipped_weather_path().read_bytes())
        else:
            write_weather(antananarivo_july(args.days, dt=args.dt), args.weather)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "simulate": cmd_simulate, "collector": cmd_collector,
            "trombe": cmd_trombe, "sweep": cmd_sweep, "emit": cmd_emit}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"zonesim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationError, WeatherFileError, KeyError, ValueError, OSError) as exc:
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"[{stamp}] zonesim {args.command} failed: {msg}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
