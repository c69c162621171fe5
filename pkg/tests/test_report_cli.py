import json
import math

import pytest

from lowduty.cli import main
from lowduty.config import EnergyProfile, MacScenario
from lowduty.report import (
    COLUMNS,
    ComparisonRow,
    SimSettings,
    SweepGrid,
    check_trends,
    from_csv,
    from_json,
    relative_error,
    run_sweep,
    to_csv,
    to_json,
)

UNIT = MacScenario(energy=EnergyProfile.identity())
FAST = SimSettings(horizon_beacon_intervals=10)


def test_relative_error_guards_zero():
    assert relative_error(0.3, 0.2) == pytest.approx(0.5)
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1e-3, 0.0) == pytest.approx(1e3)


def test_single_point_analytical_grid():
    rows = run_sweep(UNIT, SweepGrid((10.0,), (5,), 1), "analytical")
    assert len(rows) == 1
    r = rows[0]
    assert r.S_analytical > 0 and r.S_sim_mean is None and r.rel_error_S is None
    rec = dict(zip(COLUMNS, to_csv(rows).splitlines()[1].split(",")))
    assert rec["S_sim_mean"] == rec["epp_sim_stderr"] == rec["rel_error_S"] == rec["error"] == ""


def test_rows_sorted_by_duty_then_lambda():
    rows = run_sweep(UNIT, SweepGrid((5.0, 1.0), (3, 5), 2), "simulate", FAST)
    assert [(r.duty_cycle, r.lam) for r in rows] == [(1, 1), (1, 5), (0.25, 1), (0.25, 5)]
    assert all(r.S_analytical is None and r.S_sim_stderr is not None for r in rows)


def test_csv_and_json_round_trip():
    rows = run_sweep(UNIT, SweepGrid((0.0, 20.0), (5, 1), 2), "both", FAST)
    assert math.isinf(rows[0].epp_analytical)  # lambda=0
    assert from_csv(to_csv(rows)) == rows
    assert from_json(to_json(rows)) == rows
    assert to_csv(rows).splitlines()[0] == ",".join(COLUMNS)


def test_sweep_is_reproducible_and_parallel_safe():
    grid = SweepGrid((5.0, 40.0), (5, 3), 2)
    a = to_csv(run_sweep(UNIT, grid, "both", FAST))
    assert a == to_csv(run_sweep(UNIT, grid, "both", FAST))
    assert a == to_csv(run_sweep(UNIT, grid, "both", FAST, jobs=2))


def test_bad_mode():
    with pytest.raises(ValueError):
        run_sweep(UNIT, SweepGrid((1.0,), (5,)), "nope")


def _row(lam, duty, S, e):
    return ComparisonRow(lam=lam, duty_cycle=duty, S_analytical=S, epp_analytical=e,
                         S_sim_mean=S, epp_sim_mean=e)


def test_check_trends():
    good = [_row(80, 1, 0.5, 1), _row(80, 0.25, 0.2, 2), _row(80, 0.0625, 0.1, 3), _row(1, 1, 0.01, 9)]
    assert check_trends(good) == []
    bad = [_row(80, 1, 0.5, 1), _row(80, 0.25, 0.6, 0.5)]
    msgs = check_trends(bad)
    assert len(msgs) == 4 and any("S rises" in m for m in msgs)


def test_cli_solve_zero_traffic(capsys):
    assert main(["solve", "--lambda", "0", "--format", "json"]) == 0
    (rec,) = json.loads(capsys.readouterr().out)
    assert rec["S_analytical"] == 0.0 and rec["epp_analytical"] == "inf"


def test_cli_usage_errors(capsys):
    assert main(["solve", "--bo", "3", "--so", "5"]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["solve", "--payload-bytes", "5000", "--so", "0", "--bo", "0"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["sweep", "--lambdas", ""]) == 2
    assert main(["solve", "--config", "/nonexistent.cfg"]) == 2


def test_cli_convergence_failure(capsys):
    assert main(["solve", "--lambda", "40", "--max-iter", "1"]) == 1
    assert "numerical failure" in capsys.readouterr().err


def test_cli_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("# scenario\nn_nodes = 4\narrival_rate = 30\np_sleep = 1\np_idle = 1\np_rx = 1\np_tx = 1\n"
                   "t_sleep_to_idle = 0\nt_idle_to_rx = 0\n")
    assert main(["solve", "--config", str(cfg), "--format", "json"]) == 0
    (a,) = json.loads(capsys.readouterr().out)
    assert a["lambda"] == 30.0 and a["Eavg_analytical"] == pytest.approx(1.0, abs=1e-12)
    assert main(["solve", "--config", str(cfg), "--lambda", "2", "--format", "json"]) == 0
    (b,) = json.loads(capsys.readouterr().out)
    assert b["lambda"] == 2.0 and b["S_analytical"] < a["S_analytical"]


def test_cli_simulate_outputs(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    args = ["simulate", "--lambda", "20", "--horizon", "5", "--reps", "2", "--trace", str(trace)]
    assert main(args + ["--format", "json"]) == 0
    recs = json.loads(capsys.readouterr().out)
    assert [r["seed"] for r in recs] == [0, 1]
    assert len(trace.read_text().splitlines()) == 6
    assert main(args + ["--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and lines[0].startswith("seed,")
    assert main(args) == 0
    assert "S_sim" in capsys.readouterr().out


def test_cli_sweep_and_compare(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    common = ["--lambdas", "10,80", "--so-values", "5,3", "--reps", "2", "--horizon", "20",
              "--energy", "identity"]
    assert main(["sweep", "--mode", "both", "--format", "csv", "--out", str(out)] + common) == 0
    rows = from_csv(out.read_text())
    assert len(rows) == 4 and all(r.S_sim_mean is not None for r in rows)
    assert main(["compare", "--input", str(out), "--check-trends"]) == 0
    assert "trends ok" in capsys.readouterr().err

    broken = [r if r.duty_cycle == 1 else ComparisonRow(**{**r.__dict__, "S_analytical": 0.99})
              for r in rows]
    out.write_text(to_csv(broken))
    assert main(["compare", "--input", str(out), "--check-trends"]) == 1
    assert "trend violated" in capsys.readouterr().err


@pytest.mark.slow
def test_full_comparison_grid(tmp_path):
    out = tmp_path / "full.csv"
    assert main(["sweep", "--mode", "both", "--energy", "identity", "--format", "csv",
                 "--out", str(out), "--arrival-model", "bernoulli-per-slot"]) == 0
    rows = from_csv(out.read_text())
    assert len(rows) == 24
    assert {r.duty_cycle for r in rows} == {1.0, 0.25, 0.0625}
    assert all(r.S_analytical is not None and r.S_sim_stderr is not None for r in rows)
