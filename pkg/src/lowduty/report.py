"""Sweeps over arrival rate x duty cycle and analytical-vs-simulated tables."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .config import MacScenario, derive_timing
from .fixed_point import SolverOptions, solve
from .metrics import report
from .simulator import SimScenario, simulate

log = logging.getLogger(__name__)

REL_EPS = 1e-6
DEFAULT_LAMBDAS = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0)
MODES = ("analytical", "simulate", "both")


@dataclass(frozen=True)
class SweepGrid:
    lambda_values: tuple[float, ...]
    so_values: tuple[int, ...]
    replications: int = 10

    def __post_init__(self):
        if not self.lambda_values or not self.so_values:
            raise ValueError("grid lists must be non-empty")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass(frozen=True)
class SimSettings:
    horizon_beacon_intervals: int = 200
    seed: int = 0
    arrival_model: str = "exact-poisson"
    buffer_policy: str = "single-drop"
    capacity: int = 1
    rx_on_when_idle: bool = False

    def scenario(self, mac: MacScenario, rep: int) -> SimScenario:
        return SimScenario(
            mac=mac,
            horizon_beacon_intervals=self.horizon_beacon_intervals,
            seed=self.seed + rep,
            arrival_model=self.arrival_model,
            buffer_policy=self.buffer_policy,
            capacity=self.capacity,
            rx_on_when_idle=self.rx_on_when_idle,
        )


@dataclass(frozen=True)
class ComparisonRow:
    lam: float
    duty_cycle: float
    S_analytical: float | None = None
    S_sim_mean: float | None = None
    S_sim_stderr: float | None = None
    Eavg_analytical: float | None = None
    epp_analytical: float | None = None
    epp_sim_mean: float | None = None
    epp_sim_stderr: float | None = None
    rel_error_S: float | None = None
    error: str = ""


# CSV/JSON use "lambda" for the first column
COLUMNS = ["lambda"] + [f.name for f in fields(ComparisonRow)][1:]


def _mean_se(values: Sequence[float]) -> tuple[float, float | None]:
    x = np.asarray(values, dtype=float)
    if np.any(np.isinf(x)):
        return math.inf, None
    mean = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size >= 2 else None
    return mean, se


def summarize_runs(runs) -> dict:
    """Simulated columns of a ComparisonRow from replicated runs."""
    S_mean, S_se = _mean_se([r.throughput_S for r in runs])
    e_mean, e_se = _mean_se([r.energy_per_packet for r in runs])
    return dict(S_sim_mean=S_mean, S_sim_stderr=S_se, epp_sim_mean=e_mean, epp_sim_stderr=e_se)


def relative_error(analytical: float, simulated: float) -> float:
    return abs(analytical - simulated) / max(simulated, REL_EPS)


def evaluate_point(mac: MacScenario, mode: str, replications: int = 10,
                   sim: SimSettings | None = None,
                   opts: SolverOptions | None = None) -> ComparisonRow:
    """One grid point. Failures land in ``error`` instead of raising."""
    timing = derive_timing(mac)
    row = {"lam": mac.arrival_rate, "duty_cycle": timing.duty_cycle}
    errors = []
    if mode in ("analytical", "both"):
        try:
            rep = report(solve(mac, opts))
            row.update(
                S_analytical=rep.throughput,
                Eavg_analytical=rep.avg_power,
                epp_analytical=rep.energy_per_packet,
            )
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            errors.append(f"analytical: {exc}")
    if mode in ("simulate", "both"):
        sim = sim or SimSettings()
        row.update(summarize_runs([simulate(sim.scenario(mac, r)) for r in range(replications)]))
    if row.get("S_analytical") is not None and row.get("S_sim_mean") is not None:
        row["rel_error_S"] = relative_error(row["S_analytical"], row["S_sim_mean"])
    return ComparisonRow(**row, error="; ".join(errors))


def _evaluate(args):
    return evaluate_point(*args)


def run_sweep(base: MacScenario, grid: SweepGrid, mode: str = "analytical",
              sim: SimSettings | None = None, opts: SolverOptions | None = None,
              jobs: int = 1) -> list[ComparisonRow]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    points = [
        (base.with_(arrival_rate=lam, superframe_order=so), mode, grid.replications, sim, opts)
        for so in grid.so_values
        for lam in grid.lambda_values
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_evaluate, points))
    else:
        rows = [_evaluate(p) for p in points]
    for r in rows:
        if r.error:
            log.warning("lambda=%g duty=%g: %s", r.lam, r.duty_cycle, r.error)
    return sorted(rows, key=lambda r: (-r.duty_cycle, r.lam))


# --- serialization -----------------------------------------------------------


def _record(row: ComparisonRow) -> dict:
    d = asdict(row)
    d["lambda"] = d.pop("lam")
    return {k: d[k] for k in COLUMNS}


def to_csv(rows: Iterable[ComparisonRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        rec = _record(row)
        w.writerow(
            "" if v is None else (repr(float(v)) if isinstance(v, float) else v)
            for v in rec.values()
        )
    return buf.getvalue()


def from_csv(text: str) -> list[ComparisonRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != COLUMNS:
        raise ValueError(f"unexpected columns {reader.fieldnames}")
    rows = []
    for rec in reader:
        vals = {}
        for k in COLUMNS:
            v = rec[k]
            if k == "error":
                vals[k] = v
            else:
                vals["lam" if k == "lambda" else k] = None if v == "" else float(v)
        rows.append(ComparisonRow(**vals))
    return rows


def to_json(rows: Iterable[ComparisonRow]) -> str:
    def clean(v):
        # JSON has no infinity; strings keep the record lossless
        if isinstance(v, float) and math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v

    return json.dumps([{k: clean(v) for k, v in _record(r).items()} for r in rows], indent=2)


def from_json(text: str) -> list[ComparisonRow]:
    out = []
    for rec in json.loads(text):
        vals = {}
        for k in COLUMNS:
            v = rec.get(k)
            if isinstance(v, str) and k != "error":
                v = float(v)
            vals["lam" if k == "lambda" else k] = v
        out.append(ComparisonRow(**vals))
    return out


def format_table(rows: Sequence[ComparisonRow]) -> str:
    def f(v, fmt):
        # fmt starts with the column width
        width = int(fmt.split(".")[0])
        return "-".rjust(width) if v is None else format(v, fmt)

    head = (
        f"{'lambda':>8} {'duty':>7} {'S_ana':>8} {'S_sim':>8} {'+-':>7} {'relerr':>7}"
        f" {'Eavg_mW':>9} {'epp_ana':>9} {'epp_sim':>9}"
    )
    lines = [head]
    for r in rows:
        lines.append(
            f"{r.lam:8g} {r.duty_cycle:7.4g} {f(r.S_analytical, '8.4f')} {f(r.S_sim_mean, '8.4f')}"
            f" {f(r.S_sim_stderr, '7.1e')} {f(r.rel_error_S, '7.3f')}"
            f" {f(r.Eavg_analytical, '9.4g')} {f(r.epp_analytical, '9.4g')} {f(r.epp_sim_mean, '9.4g')}"
            + (f"  ! {r.error}" if r.error else "")
        )
    return "\n".join(lines)


# --- trend checks ------------------------------------------------------------


def _by_duty(rows, lam):
    sel = [r for r in rows if r.lam == lam]
    return sorted(sel, key=lambda r: -r.duty_cycle)


def check_trends(rows: Sequence[ComparisonRow]) -> list[str]:
    """Violations of: lower duty cycle -> lower S and higher energy per packet at the largest load."""
    problems = []
    lam = max(r.lam for r in rows)
    ordered = _by_duty(rows, lam)
    for label, s_key, e_key in (
        ("analytical", "S_analytical", "epp_analytical"),
        ("simulated", "S_sim_mean", "epp_sim_mean"),
    ):
        S = [getattr(r, s_key) for r in ordered]
        E = [getattr(r, e_key) for r in ordered]
        if any(v is None for v in S):
            continue
        for a, b, hi, lo in zip(S, S[1:], ordered, ordered[1:]):
            if b > a:
                problems.append(
                    f"{label} S rises from {a:.4g} to {b:.4g} as duty goes {hi.duty_cycle:g} -> {lo.duty_cycle:g} at lambda={lam:g}"
                )
        for a, b, hi, lo in zip(E, E[1:], ordered, ordered[1:]):
            if b < a:
                problems.append(
                    f"{label} energy/packet falls from {a:.4g} to {b:.4g} as duty goes {hi.duty_cycle:g} -> {lo.duty_cycle:g} at lambda={lam:g}"
                )
    return problems
