"""Command-line front end: solve, simulate, sweep, compare.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import (
    EnergyProfile,
    MacScenario,
    ScenarioError,
    load_energy,
    load_scenario,
    scenario_from_mapping,
)
from .fixed_point import ConvergenceError, SolverOptions, solve
from .metrics import RegimeError, report
from .report import (
    DEFAULT_LAMBDAS,
    ComparisonRow,
    SimSettings,
    SweepGrid,
    check_trends,
    format_table,
    from_csv,
    run_sweep,
    summarize_runs,
    to_csv,
    to_json,
)
from .simulator import simulate

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

# flag -> scenario key
_OVERRIDES = {
    "n_nodes": int,
    "arrival_rate": float,
    "beacon_order": int,
    "superframe_order": int,
    "payload_bytes": int,
    "header_bytes": int,
    "phy_rate": float,
    "symbol_rate": float,
    "mac_min_be": int,
    "mac_max_be": int,
    "max_backoff_stages": int,
    "beacon_slots": int,
}


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--config", type=Path, help="key = value scenario file")
    g.add_argument("--energy", default="cc2420",
                   help="energy profile: 'cc2420', 'identity', or a key = value file;"
                        " energy keys in --config take precedence over it")
    for key, typ in _OVERRIDES.items():
        g.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
    g.add_argument("--lambda", dest="arrival_rate", type=float, help="alias of --arrival-rate")
    g.add_argument("--bo", dest="beacon_order", type=int, help="alias of --beacon-order")
    g.add_argument("--so", dest="superframe_order", type=int, help="alias of --superframe-order")


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float, default=1e-9)
    g.add_argument("--max-iter", type=int, default=10_000)
    g.add_argument("--damping", type=float, default=0.5)
    g.add_argument("--initial", type=float, default=1e-3, help="initial per-slot transmit probability")


def _add_sim_args(p: argparse.ArgumentParser, reps_default: int) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--reps", type=int, default=reps_default)
    g.add_argument("--horizon", type=int, default=200, help="beacon intervals per run")
    g.add_argument("--arrival-model", choices=("exact-poisson", "bernoulli-per-slot"),
                   default="exact-poisson")
    g.add_argument("--buffer", choices=("single-drop", "queue"), default="single-drop")
    g.add_argument("--capacity", type=int, default=1, help="frames held per node in queue mode")
    g.add_argument("--rx-on-when-idle", action="store_true",
                   help="charge traffic-free active slots at idle rather than sleep power")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--out", type=Path, help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowduty",
        description="802.15.4 slotted CSMA/CA under low duty cycle: analytical model and simulator",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the analytical model for one scenario")
    _add_scenario_args(p)
    _add_solver_args(p)
    _add_output_args(p)

    p = sub.add_parser("simulate", help="simulate one scenario")
    _add_scenario_args(p)
    _add_sim_args(p, reps_default=1)
    _add_output_args(p)
    p.add_argument("--trace", type=Path, help="per-beacon-interval CSV trace (first replication)")

    for name, help_ in (("sweep", "grid of arrival rates x superframe orders"),
                        ("compare", "sweep in both modes and check duty-cycle trends")):
        p = sub.add_parser(name, help=help_)
        _add_scenario_args(p)
        _add_solver_args(p)
        _add_sim_args(p, reps_default=10)
        _add_output_args(p)
        p.add_argument("--lambdas", type=_float_list,
                       default=list(DEFAULT_LAMBDAS), help="comma-separated frames/s per node")
        p.add_argument("--so-values", type=_int_list, default=[5, 3, 1],
                       help="comma-separated superframe orders")
        p.add_argument("--jobs", type=int, default=1)
        if name == "sweep":
            p.add_argument("--mode", choices=("analytical", "simulate", "both"), default="analytical")
        else:
            p.add_argument("--input", type=Path, help="compare an existing sweep CSV instead of running")
            p.add_argument("--check-trends", action="store_true",
                           help="exit 1 if S/energy trends across duty cycles are violated")
    return parser


def scenario_from_args(args) -> MacScenario:
    if args.energy == "cc2420":
        energy = EnergyProfile.cc2420()
    elif args.energy == "identity":
        energy = EnergyProfile.identity()
    else:
        energy = load_energy(args.energy)
    base = MacScenario(energy=energy)
    if args.config:
        base = load_scenario(args.config, base)
    overrides = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    return scenario_from_mapping(overrides, base)


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(tolerance=args.tol, max_iterations=args.max_iter,
                         damping=args.damping, initial_tx=args.initial)


def _sim_settings(args) -> SimSettings:
    return SimSettings(
        horizon_beacon_intervals=args.horizon,
        seed=args.seed,
        arrival_model=args.arrival_model,
        buffer_policy=args.buffer,
        capacity=args.capacity,
        rx_on_when_idle=args.rx_on_when_idle,
    )


def _emit(args, rows: list[ComparisonRow]) -> None:
    text = {"table": format_table, "csv": to_csv, "json": to_json}[args.format](rows)
    if args.format == "table":
        text += "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    mac = scenario_from_args(args)
    sol = solve(mac, _solver_opts(args))
    rep = report(sol)
    row = ComparisonRow(
        lam=mac.arrival_rate,
        duty_cycle=sol.timing.duty_cycle,
        S_analytical=rep.throughput,
        Eavg_analytical=rep.avg_power,
        epp_analytical=rep.energy_per_packet,
    )
    if args.format == "table":
        ch = sol.channel
        print(f"converged in {sol.iterations} iterations (residual {sol.residual:.2e})", file=sys.stderr)
        print(f"p_t={sol.node_tx:.6g}  alpha={ch.alpha:.6g}  beta={ch.beta:.6g}  delta={ch.delta:.6g}"
              f"  p_ii={ch.idle_idle:.6g}  p_i={ch.idle:.6g}", file=sys.stderr)
    _emit(args, [row])
    return EXIT_OK


def cmd_simulate(args) -> int:
    mac = scenario_from_args(args)
    settings = _sim_settings(args)
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    runs = []
    for r in range(args.reps):
        st = simulate(settings.scenario(mac, r))
        if r == 0 and args.trace:
            st.write_trace(args.trace)
        runs.append(st)
    if args.format == "table":
        row = ComparisonRow(lam=mac.arrival_rate, duty_cycle=2.0 ** (mac.superframe_order - mac.beacon_order),
                            **summarize_runs(runs))
        _emit(args, [row])
        return EXIT_OK
    records = [dict(seed=settings.seed + i, **st.flat()) for i, st in enumerate(runs)]
    if args.format == "json":
        text = json.dumps(records, indent=2, default=str)
    else:
        keys = list(records[0])
        text = ",".join(keys) + "\n" + "".join(
            ",".join(repr(v) if isinstance(v, float) else str(v) for v in rec.values()) + "\n"
            for rec in records
        )
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _grid(args) -> SweepGrid:
    try:
        return SweepGrid(tuple(args.lambdas), tuple(args.so_values), args.reps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_sweep(args) -> int:
    mac = scenario_from_args(args)
    rows = run_sweep(mac, _grid(args), args.mode, _sim_settings(args), _solver_opts(args), args.jobs)
    _emit(args, rows)
    return EXIT_NUMERIC if any(r.error for r in rows) else EXIT_OK


def cmd_compare(args) -> int:
    if args.input:
        rows = from_csv(args.input.read_text())
    else:
        mac = scenario_from_args(args)
        rows = run_sweep(mac, _grid(args), "both", _sim_settings(args), _solver_opts(args), args.jobs)
    _emit(args, rows)
    status = EXIT_NUMERIC if any(r.error for r in rows) else EXIT_OK
    if args.check_trends:
        problems = check_trends(rows)
        for msg in problems:
            print(f"trend violated: {msg}", file=sys.stderr)
        if problems:
            status = EXIT_NUMERIC
        else:
            print("trends ok", file=sys.stderr)
    return status


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "sweep": cmd_sweep, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, UsageError, FileNotFoundError) as exc:
        print(f"lowduty {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, RegimeError) as exc:
        print(f"lowduty {args.command}: numerical failure: {exc}", file=sys.stderr)
        trace = getattr(exc, "trace", None)
        if trace:
            print(f"  last residuals: {', '.join(f'{r:.2e}' for r in trace[-5:])}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
