import csv
import io
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from conftest import tiny
from indnet import cli
from indnet.bb import SolveStats
from indnet.instance import save_instance
from indnet.methods import solve_direct
from indnet.render import RenderError, render_design
from indnet.report import (CSV_COLUMNS, RunRecord, format_csv, format_table, load_record,
                           parse_table, save_record)
from indnet.solution import CoverageStats

SVG = "{http://www.w3.org/2000/svg}"


def record(obj=12.0, gap=0.0, method="direct", **kw):
    stats = SolveStats(t=1.234, nodes=5, n_cuts=3, obj_v=obj, bound=obj, gap=gap, status="optimal")
    cov = CoverageStats(7.0, 5.0, 0.0, 1, 1, 0) if obj is not None else None
    return RunRecord("tiny-1", method, stats, cov, **kw)


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny-1.json"
    save_instance(tiny(1), path)
    return path


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_csv_header_is_exact():
    text = format_csv([record()])
    assert text.splitlines()[0] == ("instance,method,percentage,type,t,gap,n_cuts,obj_v,"
                                    "demand_R,demand_S,demand_RS,pairs_R,pairs_S,pairs_RS")
    assert text.splitlines()[1] == "tiny-1,direct,-,-,1.23,0.00,3,12,7,5,0,1,1,0"


def test_table_and_csv_hold_the_same_values():
    recs = [record(), record(None, None, "benders", percentage=10.0, selection_type=2),
            record(40.0, 240.9, "benders", percentage=2.0, selection_type=3)]
    table = parse_table(format_table(recs))
    rows = list(csv.DictReader(io.StringIO(format_csv(recs))))
    assert table == rows
    assert len(rows) == 3
    assert rows[1]["obj_v"] == "-" and rows[1]["gap"] == "-" and rows[1]["demand_R"] == "-"
    assert rows[2]["gap"] == "240.90"


def test_table_is_aligned():
    lines = format_table([record(), record(1234.0)]).splitlines()
    assert len({len(line) for line in lines}) == 1
    assert set(lines[1].replace(" ", "")) == {"-"}


def test_record_round_trip(tmp_path):
    rec = record(percentage=50.0, selection_type=1, seed=3, lam=0.5)
    path = tmp_path / "r.json"
    save_record(rec, path)
    assert load_record(path) == rec
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == 1
    doc["schema_version"] = 99
    with pytest.raises(ValueError):
        RunRecord.from_dict(doc)
    with pytest.raises(ValueError):
        record(method="cplex")


def test_render_is_deterministic_with_two_lines():
    inst = tiny(1)
    sol = solve_direct(inst).solution
    a, b = render_design(inst, sol), render_design(inst, sol)
    assert a == b
    root = ET.fromstring(a)
    groups = [g for g in root.iter(SVG + "g") if g.find(SVG + "polyline") is not None]
    assert [g.get("id") for g in groups] == ["rapid-line", "slow-line"]
    assert groups[0].get("stroke-dasharray") is None
    assert groups[1].get("stroke-dasharray")
    stops = [c for c in root.iter(SVG + "circle") if c.get("class") == "stop"]
    assert len(stops) == len(set(sol.rapid_stops) | set(sol.slow_stops))
    fills = {c.get("fill") for c in root.iter(SVG + "circle")}
    assert fills == {"#333333", "#ffffff"}


def test_render_empty_design():
    root = ET.fromstring(render_design(tiny(2), None))
    assert root.find(f"{SVG}g[@id='network']") is not None
    assert root.find(f".//{SVG}polyline") is None


def test_render_needs_coordinates():
    from dataclasses import replace

    inst = tiny(2)
    broken = replace(inst, nodes=(replace(inst.nodes[0], position=()),) + inst.nodes[1:])
    with pytest.raises(RenderError):
        render_design(broken, None)


def test_cli_validate(tiny_file, capsys, tmp_path):
    code, out, _ = run(["validate", tiny_file], capsys)
    assert code == 0 and json.loads(out)["pairs"] == 4
    bad = tmp_path / "bad.json"
    bad.write_text('{"params": {}}')
    code, _, err = run(["validate", bad], capsys)
    assert code == 1 and "schema" in err


def test_cli_usage_errors(capsys):
    assert run(["solve", "x.json", "--bogus"], capsys)[0] == 2
    assert run(["solve", "x.json", "--type", "4"], capsys)[0] == 2
    assert run([], capsys)[0] == 2


def test_cli_missing_instance(capsys):
    assert run(["solve", "no-such-file.json"], capsys)[0] == 1


def test_cli_internal_error(tiny_file, capsys, monkeypatch, tmp_path):
    def boom(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "solve_direct", boom)
    assert run(["solve", tiny_file, "--record-dir", tmp_path], capsys)[0] == 3


def test_cli_solve_writes_record_and_report(tiny_file, tmp_path, capsys):
    runs = tmp_path / "runs"
    sol = tmp_path / "sol.json"
    code, out, _ = run(["solve", tiny_file, "--record-dir", runs, "-o", sol], capsys)
    assert code == 0 and "obj_v=50" in out
    code, out, _ = run(["solve", tiny_file, "--method", "benders", "--percentage", "2", "--type", "2",
                        "--record-dir", runs, "--cut-log", tmp_path / "cuts.jsonl"], capsys)
    assert code == 0 and "obj_v=50" in out
    records = sorted(runs.glob("*.record.json"))
    assert len(records) == 2
    code, out, _ = run(["report", *records, "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2 and {r["obj_v"] for r in rows} == {"50"}
    assert tuple(rows[0]) == CSV_COLUMNS
    code, out, _ = run(["report", *records], capsys)
    assert len(parse_table(out)) == 2
    cuts = (tmp_path / "cuts.jsonl").read_text().splitlines()
    assert cuts and all(json.loads(line)["violation"] > 0 for line in cuts)
    svg = tmp_path / "sol.svg"
    assert run(["plot", sol, "-o", svg], capsys)[0] == 0
    assert "rapid-line" in svg.read_text()


def test_cli_time_limit_without_incumbent(tiny_file, tmp_path, capsys):
    code, out, _ = run(["solve", tiny_file, "--time-limit", "0", "--record-dir", tmp_path], capsys)
    assert code == 1 and "obj_v=-" in out


def test_cli_parallel_jobs(tmp_path, capsys):
    files = []
    for seed in (2, 3):
        path = tmp_path / f"tiny-{seed}.json"
        save_instance(tiny(seed), path)
        files.append(path)
    code, out, _ = run(["solve", *files, "--jobs", "2", "--record-dir", tmp_path / "runs"], capsys)
    assert code == 0 and out.count("method=direct") == 2


def test_cli_gen_and_filter_ladder(tmp_path, capsys):
    path = tmp_path / "sev.json"
    assert run(["gen", "--seed", "2", "--size", "seville-like", "-o", path], capsys)[0] == 0
    code, out, _ = run(["filter", path, "--min-demand", "150"], capsys)
    assert code == 0 and out.startswith("pairs=82 ")


def test_cli_sequential_demo(tmp_path, capsys):
    code, out, _ = run(["sequential", "seq_gap_demo", "--record-dir", tmp_path], capsys)
    assert code == 0 and "obj_v=10" in out
    code, out, _ = run(["oracle", "seq_gap_demo"], capsys)
    assert code == 0 and out.startswith("objective=14")


def test_cli_oracle_cap(tiny_file, capsys):
    assert run(["oracle", tiny_file, "--cap", "1"], capsys)[0] == 1


def test_cli_export_and_lp(tiny_file, tmp_path, capsys):
    mps = tmp_path / "m.mps"
    assert run(["export", tiny_file, "-o", mps], capsys)[0] == 0
    code, out, _ = run(["lp", mps], capsys)
    assert code == 0 and out.startswith("status=optimal")


def test_module_entry_point(tiny_file):
    proc = subprocess.run([sys.executable, "-m", "indnet", "validate", str(tiny_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and '"nodes": 8' in proc.stdout
