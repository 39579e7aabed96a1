from __future__ import annotations

import csv
import json
import math

import pytest

from intentplan.bench import (
    CSV_COLUMNS,
    Gate,
    Pair,
    Report,
    format_table,
    h1h2_gates,
    h1h2_pair,
    h1h2_rows,
    paired_ratios,
    run_experiment,
    sign_test,
    total_ratios,
)
from intentplan.controller import RunRecord


def record(actions: int, achieved: bool = True, planning: float = 1.0) -> RunRecord:
    return RunRecord(achieved, achieved, 1, planning, actions * 10, actions, (), "done")


def test_ratio_is_per_pair_then_mean() -> None:
    pairs = [Pair("1", 0, record(2), record(1)), Pair("1", 1, record(10), record(10))]
    ratios = paired_ratios(pairs, lambda r: float(r.actions_executed))
    assert ratios == [2.0, 1.0]
    # the ratio of the means would be 12/11
    assert sum(ratios) / len(ratios) == 1.5


def test_zero_denominator_skipped() -> None:
    assert paired_ratios([Pair("1", 0, record(3), record(0))], lambda r: float(r.actions_executed)) == []


def test_total_time_normalises_each_component() -> None:
    pair = Pair("1", 0, record(4, planning=3.0), record(2, planning=1.0))
    # planning 3/1, execution 40/20
    assert total_ratios([pair]) == [2.5]


def test_sign_test() -> None:
    assert sign_test(0, 0) == 1.0
    assert sign_test(5, 0) == pytest.approx(1 / 32)
    assert sign_test(3, 3) > 0.5


def test_rows_and_gates_from_synthetic_pairs() -> None:
    pairs = [Pair("5", s, record(6, achieved=False), record(9)) for s in range(3)]
    rows = h1h2_rows(pairs)
    assert {r.measure for r in rows} == {"planning_time", "execution_time", "actions", "total_time"}
    acts = next(r for r in rows if r.measure == "actions")
    assert (acts.acc_tp, acts.acc_ati, acts.n) == (0.0, 1.0, 3)
    assert math.isclose(acts.ratio_mean, 6 / 9)
    gates = {g.name: g.passed for g in h1h2_gates(pairs)}
    assert gates == {"scenario5-dichotomy": True, "scenario5-ati-accuracy": True}


def test_pair_determinism() -> None:
    a, b = h1h2_pair(3, 4), h1h2_pair(3, 4)
    assert a.base.trace == b.base.trace and a.ours.trace == b.ours.trace


def test_report_files(tmp_path) -> None:
    report = run_experiment("h1h2", 1, seed=3, out=tmp_path, cases=["1", "5"])
    with open(tmp_path / "h1h2.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + 2 * 4
    doc = json.loads((tmp_path / "h1h2.json").read_text())
    assert [r["measure"] for r in doc["rows"]] == [r[0] for r in rows[1:]]
    assert doc["passed"] == report.passed
    assert sorted(p.name for p in (tmp_path / "traces").iterdir()) == [
        "h1h2-1-3-ati.log", "h1h2-1-3-tp.log", "h1h2-5-3-ati.log", "h1h2-5-3-tp.log"]


def test_single_trial_report_is_stable(tmp_path) -> None:
    a = run_experiment("h1h2", 1, seed=7, out=tmp_path / "a", cases=["2"])
    b = run_experiment("h1h2", 1, seed=7, out=tmp_path / "b", cases=["2"])
    strip = lambda rows: [(r.measure, r.ratio_mean, r.n) for r in rows if r.measure not in ("planning_time", "total_time")]  # noqa: E731
    assert strip(a.rows) == strip(b.rows)
    assert (tmp_path / "a" / "traces" / "h1h2-2-7-ati.log").read_text() == (tmp_path / "b" / "traces" / "h1h2-2-7-ati.log").read_text()


def test_h3_small(tmp_path) -> None:
    report = run_experiment("h3", 2, seed=0, out=tmp_path, cases=["L1", "L2"])
    doc = json.loads((tmp_path / "h3.json").read_text())
    assert set(doc["levels"]) == {"L1", "L2"}
    assert all(r.acc_ati == 1.0 for r in report.rows)
    assert "zoom-completes" in {g.name for g in report.gates}


def test_bad_arguments() -> None:
    with pytest.raises(ValueError):
        run_experiment("h1h2", 0)
    with pytest.raises(ValueError):
        run_experiment("h4", 1)


def test_table_lists_gates() -> None:
    text = format_table(Report("h1h2", [], [Gate("x", True, "fine"), Gate("y", False, "bad")]))
    assert "PASS x: fine" in text and "FAIL y: bad" in text
