from __future__ import annotations

import json

from intentplan.cli import main

BOTH = "loc(book1, library), loc(book2, library), -in_hand(rob1, book1), -in_hand(rob1, book2)"


def test_plan_builtin(capsys) -> None:
    code = main(["plan", "ra", "--goal", BOTH, "--init", "loc(rob1, kitchen), in_hand(rob1, book1), loc(book2, kitchen)"])
    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert out[0] == "0: move(rob1, library)" and len(out) == 6


def test_plan_json_from_file(tmp_path, capsys) -> None:
    from intentplan.dsl import builtin_text

    path = tmp_path / "ra.dom"
    path.write_text(builtin_text("ra"))
    code = main(["plan", str(path), "--goal", "loc(rob1, library)", "--init", "loc(rob1, office1)", "--json"])
    doc = json.loads(capsys.readouterr().out)
    assert code == 0 and doc["actions"] == ["move(rob1, kitchen)", "move(rob1, library)"]


def test_plan_errors(capsys) -> None:
    assert main(["plan", "ra", "--goal", "loc(rob1, moon)"]) == 2
    assert main(["plan", "nowhere.dom", "--goal", "loc(rob1, library)"]) == 2
    assert main(["plan", "ra", "--goal", "loc(rob1, library)", "--timeout", "0"]) == 2


def test_trace_is_reproducible(capsys) -> None:
    assert main(["trace", "--scenario", "3", "--mode", "ati", "--seed", "5"]) == 0
    first = capsys.readouterr().out
    main(["trace", "--scenario", "3", "--mode", "ati", "--seed", "5"])
    assert capsys.readouterr().out == first


def test_trace2_tp_fails(capsys) -> None:
    assert main(["trace", "--scenario", "t2", "--mode", "tp"]) == 1
    assert "achieved=false" in capsys.readouterr().out


def test_trace_level_json(capsys) -> None:
    assert main(["trace", "--level", "L2", "--seed", "1", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["goal_achieved"] and doc["fine_plans"] > 0


def test_bench_exit_code(tmp_path, capsys) -> None:
    code = main(["bench", "h1h2", "--trials", "2", "--seed", "0", "--out", str(tmp_path), "--cases", "5"])
    assert code == 0
    assert "PASS scenario5-dichotomy" in capsys.readouterr().out
    assert (tmp_path / "h1h2.csv").exists()
