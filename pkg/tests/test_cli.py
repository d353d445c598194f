import json

import pytest

from trussforge.cli import BenchRow, bench_workers, format_bench, main
from trussforge.io import read_truss
from trussforge.model import total_volume


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_optimize_writes_a_truss(tmp_path, capsys):
    out = tmp_path / "t.json"
    svg = tmp_path / "t.svg"
    code, _, err = run(capsys, "optimize", "fixtures/one_load.json", "-o", str(out), "--svg", str(svg))
    assert code == 0
    assert "final" in err
    t = read_truss(out)
    assert total_volume(t) == pytest.approx(json.loads(out.read_text())["volume"], abs=1e-9)
    assert svg.read_text().startswith("<?xml")


def test_optimize_to_stdout(capsys):
    code, out, _ = run(capsys, "optimize", "one_bar", "--levels", "0")
    assert code == 0
    assert json.loads(out)["volume"] == pytest.approx(1.0)


def test_gsm_unbalanced_exits_one(capsys):
    code, _, err = run(capsys, "gsm", "fixtures/unbalanced.json")
    assert code == 1
    assert "load case 0" in err


def test_missing_file_exits_two(capsys, tmp_path):
    code, _, err = run(capsys, "gsm", str(tmp_path / "nope.json"))
    assert code == 2 and "error" in err


def test_schema_error_exits_two(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"dimension": 4, "joints": []}')
    code, _, err = run(capsys, "gsm", str(p))
    assert code == 2
    assert err.count("error:") >= 2


def test_gsm_then_subdivide_then_check(tmp_path, capsys):
    g = tmp_path / "g.json"
    s = tmp_path / "s.json"
    assert run(capsys, "gsm", "three_force", "--n", "3", "-o", str(g))[0] == 0
    assert run(capsys, "subdivide", str(g), "three_force", "-o", str(s))[0] == 0
    code, out, _ = run(capsys, "check", str(s), "three_force")
    assert code == 0
    assert "load case 0: equilibrium residual" in out


def test_check_flags_a_broken_truss(tmp_path, capsys):
    g = tmp_path / "g.json"
    run(capsys, "gsm", "two_bar_fan", "-o", str(g))
    doc = json.loads(g.read_text())
    for b in doc["bars"]:
        b["force_densities"] = [0.0]
    g.write_text(json.dumps(doc))
    code, _, err = run(capsys, "check", str(g), "two_bar_fan")
    assert code == 1 and "exceeds" in err


def test_obj_sidecar(tmp_path, capsys):
    obj = tmp_path / "t.obj"
    assert run(capsys, "optimize", "tripod", "--obj", str(obj), "-o", str(tmp_path / "t.json"))[0] == 0
    side = json.loads(obj.with_suffix(".areas.json").read_text())
    n_v = sum(l.startswith("v ") for l in obj.read_text().splitlines())
    assert n_v == len(side["joint_ids"])


def test_bench_filter(capsys):
    code, out, _ = run(capsys, "bench", "--filter", "two_bar")
    assert code == 0
    assert "two_bar_fan" in out and "final 2.000000" in out


def test_bench_unknown_filter(capsys):
    assert run(capsys, "bench", "--filter", "nothing-like-this")[0] == 2


def test_bench_table_formatting():
    rows = [
        BenchRow("a", (("ground structure", 10, 2.5, 0.1), ("final", 3, 2.0, 0.01)), 0.2),
        BenchRow("b", (), 0.0, "UnsupportableError: x"),
    ]
    text = format_bench(rows)
    assert "final 2.000000 (3 bars" in text
    assert "ground structure: 10 / 2.5000" in text
    assert text.splitlines()[1].startswith("b")


def test_thread_env(monkeypatch):
    monkeypatch.setenv("TRUSSFORGE_THREADS", "3")
    assert bench_workers() == 3
    monkeypatch.setenv("TRUSSFORGE_THREADS", "lots")
    assert bench_workers() == 1
