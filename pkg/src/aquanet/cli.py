"""Command-line front end.

Subcommands:

    simulate   run one scheme, write a concentration CSV plus diagnostics
    compare    run several schemes plus the Lagrangian oracle, write relative
               difference tables and overlay plots
    grid-info  print the fixed grid (segments, lengths, Courant ranges)
    validate   topology and hydraulics checks, nonzero exit on findings

The AQUANET_LOG environment variable sets the log level (DEBUG, INFO, ...).
Module errors exit nonzero with their category prefixed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .engine import run_simulation
from .errors import AquanetError
from .hydraulics import (
    build_fixed_grid,
    cfl_report,
    courant_numbers,
    load_hydraulics,
)
from .network import parse_network, validate_topology
from .scenario import SCHEMES, parse_scenario

log = logging.getLogger("aquanet")

EXIT_CODES = {
    "network-file": 2,
    "hydraulics": 3,
    "scenario": 4,
    "cfl": 5,
    "mass-balance": 6,
    "solver": 7,
    "error": 1,
}


def _setup_logging() -> None:
    level = os.environ.get("AQUANET_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aquanet",
        description="Two-species water-quality transport in distribution networks",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_inputs(p, scenario_required=True):
        p.add_argument("--network", required=True, help="network topology file")
        p.add_argument("--hydraulics", required=True, help="hydraulic schedule CSV")
        if scenario_required:
            p.add_argument("--scenario", required=True, help="scenario file")
        p.add_argument("--dt", type=float, help="override quality time-step, s")
        p.add_argument("--duration", type=float, help="override run length, s")

    sim = sub.add_parser("simulate", help="run one scheme and write results")
    add_inputs(sim)
    sim.add_argument("--scheme", choices=SCHEMES, help="override scenario scheme")
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--clamp-negative", action="store_true")
    sim.add_argument("--record-all", action="store_true")
    sim.add_argument(
        "--dump-matrices", action="store_true",
        help="write the first assembled E/A/B triplets per species",
    )

    cmp_ = sub.add_parser("compare", help="run schemes against the Lagrangian oracle")
    add_inputs(cmp_)
    cmp_.add_argument(
        "--schemes", default="lw,moc",
        help="comma-separated scheme list (ltd is always added as reference)",
    )
    cmp_.add_argument("--out", default=".", help="output directory")
    cmp_.add_argument("--clamp-negative", action="store_true")
    cmp_.add_argument("--record-all", action="store_true")

    gi = sub.add_parser("grid-info", help="print the fixed grid and CFL report")
    add_inputs(gi, scenario_required=False)

    val = sub.add_parser("validate", help="check topology and hydraulics")
    val.add_argument("--network", required=True)
    val.add_argument("--hydraulics", required=False)
    return parser


def _read(path: str) -> str:
    return Path(path).read_text()


def _load_common(args, need_scenario=True):
    net = parse_network(_read(args.network))
    schedule = load_hydraulics(_read(args.hydraulics), net)
    scenario = None
    if need_scenario:
        scenario = parse_scenario(_read(args.scenario))
        if args.dt is not None:
            scenario.dt = args.dt
        if args.duration is not None:
            scenario.duration = args.duration
    return net, schedule, scenario


def _write_diagnostics(result, path: Path) -> None:
    d = result.diagnostics
    with open(path, "w") as fh:
        fh.write(f"scheme: {result.scheme}\n")
        fh.write(f"min_value_species_1_mg_L: {d.min_value[1]:.6g}\n")
        fh.write(f"min_value_species_2_mg_L: {d.min_value[2]:.6g}\n")
        fh.write(f"max_solve_residual: {d.max_solve_residual:.3g}\n")
        fh.write(f"clamped_entries: {d.clamped_entries}\n")
        for w in d.warnings:
            fh.write(f"warning: {w}\n")


def _cmd_simulate(args) -> int:
    net, schedule, scenario = _load_common(args)
    if args.scheme:
        scenario.scheme = args.scheme
    if args.clamp_negative:
        scenario.clamp_negative = True
    if args.record_all:
        scenario.record_all = True
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.dump_matrices and scenario.scheme != "ltd":
        _dump_matrices(net, schedule, scenario, out)

    result = run_simulation(net, schedule, scenario)
    csv_path = out / f"timeseries_{scenario.scheme}.csv"
    analysis.export_timeseries(result, csv_path)
    _write_diagnostics(result, out / f"diagnostics_{scenario.scheme}.txt")
    print(f"wrote {csv_path}")
    return 0


def _dump_matrices(net, schedule, scenario, out: Path) -> None:
    from .engine import initial_state
    from .hydraulics import _tank_net_inflow
    from .schemes import AssemblyContext, StateLayout, assemble

    grid = build_fixed_grid(net, schedule, scenario.dt)
    layout = StateLayout(net, grid)
    cfield = courant_numbers(grid, net, schedule)
    state = initial_state(layout, net, scenario)
    step = schedule.steps[0]
    tank_v = dict(step.tank_volumes)
    v_next = {
        tid: v + _tank_net_inflow(net, tid, step.flows, step.tank_demands)
        * scenario.dt
        for tid, v in tank_v.items()
    }
    ctx = AssemblyContext(
        net=net, layout=layout, grid=grid, reactions=scenario.reactions,
        dt=scenario.dt, step=step, courant=cfield.courant[:, 0],
        direction=cfield.direction[:, 0], tank_v_now=tank_v, tank_v_next=v_next,
    )
    for species in (1, 2):
        other = state.x2 if species == 1 else state.x1
        system = assemble(scenario.scheme, ctx, species, x_other=other)
        path = out / f"matrices_{scenario.scheme}_s{species}.txt"
        path.write_text(system.dump_coordinates())
        print(f"wrote {path}")


def _cmd_compare(args) -> int:
    net, schedule, scenario = _load_common(args)
    if args.clamp_negative:
        scenario.clamp_negative = True
    if args.record_all:
        scenario.record_all = True
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    for s in schemes:
        if s not in SCHEMES:
            raise AquanetError(f"unknown scheme {s!r}")
    if "ltd" not in schemes:
        schemes.append("ltd")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for s in schemes:
        import copy

        sc = copy.deepcopy(scenario)
        sc.scheme = s
        results[s] = run_simulation(net, schedule, sc)
        analysis.export_timeseries(results[s], out / f"timeseries_{s}.csv")

    ref = results["ltd"]
    rows = []
    for s in schemes:
        if s == "ltd":
            continue
        for (eid, species), ref_series in sorted(ref.series.items()):
            model = results[s].series.get((eid, species))
            if model is None or len(model) != len(ref_series):
                continue
            rd = analysis.relative_difference(ref_series, model)
            finite = rd[np.isfinite(rd)]
            max_rd = float(np.abs(finite).max()) if finite.size else float("nan")
            rows.append((s, eid, species, max_rd))

    rd_path = out / "rd_summary.csv"
    with open(rd_path, "w") as fh:
        fh.write("scheme,element_id,species,max_abs_rd\n")
        for s, eid, species, max_rd in rows:
            fh.write(f"{s},{eid},{species},{max_rd:.6g}\n")
    print(f"wrote {rd_path}")
    for s, eid, species, max_rd in rows:
        print(f"{s} {eid} species {species}: max |RD| = {max_rd:.3%}")

    elements = sorted({eid for _, eid, _, _ in rows})
    if elements:
        analysis.render_plots(results, elements, out / "plots")
        print(f"wrote plots under {out / 'plots'}")
    return 0


def _cmd_grid_info(args) -> int:
    net = parse_network(_read(args.network))
    schedule = load_hydraulics(_read(args.hydraulics), net)
    dt = args.dt if args.dt is not None else 1.0
    grid = build_fixed_grid(net, schedule, dt)
    cfield = courant_numbers(grid, net, schedule)
    print(f"dt = {dt:g} s, {grid.total_segments} pipe segments total")
    print(f"{'pipe':<12}{'segments':>9}{'dx_m':>12}{'courant_min':>13}{'courant_max':>13}")
    for i, pid in enumerate(grid.pipe_ids):
        lo, hi = cfield.courant[i].min(), cfield.courant[i].max()
        print(
            f"{pid:<12}{grid.segments[i]:>9d}{grid.seg_length[i]:>12.4g}"
            f"{lo:>13.4g}{hi:>13.4g}"
        )
    report = cfl_report(cfield)
    for pid, start, lam in report.violations:
        print(f"CFL violation: pipe {pid} at {start:g} s, courant {lam:.4g}")
    for pid, start in report.stagnant:
        print(f"stagnant: pipe {pid} at {start:g} s")
    print("CFL report:", "ok" if report.ok else f"{len(report.violations)} violations")
    return 0 if report.ok else EXIT_CODES["cfl"]


def _cmd_validate(args) -> int:
    net = parse_network(_read(args.network))
    report = validate_topology(net)
    for f in report.findings:
        print(f"finding: {f.element_id}: {f.reason}")
    warnings = []
    if args.hydraulics:
        schedule = load_hydraulics(_read(args.hydraulics), net)
        warnings = schedule.warnings
        for w in warnings:
            print(f"warning: {w}")
    if report.ok:
        print("validation ok" + (" (with warnings)" if warnings else ""))
        return 0
    return EXIT_CODES["network-file"]


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    handler = {
        "simulate": _cmd_simulate,
        "compare": _cmd_compare,
        "grid-info": _cmd_grid_info,
        "validate": _cmd_validate,
    }[args.subcommand]
    try:
        return handler(args)
    except AquanetError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
