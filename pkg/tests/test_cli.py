import csv
import json

import pytest

from potlab.cli import main


@pytest.fixture(scope="module")
def grid_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("spaces") / "g6.json"
    assert main(["gen-space", "--set", "side=6", "--out", str(p)]) == 0
    return p


@pytest.fixture(scope="module")
def small_graph(tmp_path_factory):
    p = tmp_path_factory.mktemp("spaces") / "r.json"
    assert main(["gen-space", "--set", "kind=random", "--set", "n_interior=8",
                 "--seed", "4", "--out", str(p)]) == 0
    return p


def _report(path):
    return json.loads(path.read_text())


def test_capacity_report(grid_file, tmp_path):
    out = tmp_path / "cap.json"
    assert main(["capacity", "--space", str(grid_file), "--out", str(out)]) == 0
    rep = _report(out)
    assert rep["schema_version"] == 1 and rep["passed"]
    assert rep["results"]["htau"][1]["ratio"] == pytest.approx(1.0, abs=1e-12)


def test_hodge_sweep_from_stored_equilibrium(grid_file, tmp_path):
    cap = tmp_path / "cap.json"
    assert main(["capacity", "--space", str(grid_file), "--out", str(cap)]) == 0
    out = tmp_path / "sweep.json"
    code = main(["hodge-sweep", "--space", str(grid_file), "--out", str(out),
                 "--set", f"equilibrium={json.dumps(str(cap))}", "--set", "delta_list=[0,0.25,-0.25,0.5]"])
    assert code == 0
    rows = list(csv.DictReader(out.with_suffix(".csv").open()))
    assert [float(r["delta"]) for r in rows] == [0.0, 0.25, -0.25, 0.5]
    assert float(rows[0]["norm"]) == pytest.approx(1.0, abs=1e-9)


def test_invariant_failure_exit_code(grid_file, tmp_path, capsys):
    out = tmp_path / "cap.json"
    code = main(["capacity", "--space", str(grid_file), "--out", str(out), "--set", "tolerance=-0.5"])
    assert code == 2
    assert "invariant failed: htau_ratio<=1+tol" in capsys.readouterr().err
    assert _report(out)["passed"] is False


def test_exhaustive_guard_exit_code(grid_file, capsys):
    assert main(["trace", "--space", str(grid_file), "--set", "family=exhaustive"]) == 1
    assert "exhaustive family limited to ≤ 14 interior vertices" in capsys.readouterr().err


def test_trace_exhaustive_small_graph(small_graph, tmp_path):
    out = tmp_path / "t.json"
    assert main(["trace", "--space", str(small_graph), "--set", "family=exhaustive", "--set", "n_q=3",
                 "--out", str(out)]) == 0
    assert _report(out)["verdicts"]["C1<=4*C3_exhaustive"]


@pytest.mark.parametrize("argv", [
    ["capacity"],
    ["capacity", "--space", "/nonexistent.json"],
    ["capacity", "--set", "no_such_param=1", "--space", "x"],
    ["frobnicate"],
    ["gen-space"],
])
def test_input_errors_exit_one(argv):
    assert main(argv) == 1


def test_malformed_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert main(["suite", "--config", str(cfg)]) == 1


def test_config_file_and_override(grid_file, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"space_path": str(grid_file), "seed": 3, "params": {"tau_list": [1.0]}}))
    out = tmp_path / "r.json"
    assert main(["capacity", "--config", str(cfg), "--set", "radius=1", "--out", str(out)]) == 0
    rep = _report(out)
    assert rep["config"]["seed"] == 3 and rep["config"]["params"]["radius"] == 1
    assert [r["tau"] for r in rep["results"]["htau"]] == [1.0]


def test_suite_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["suite", "--seed", "7", "--out", str(a)]) == 0
    assert main(["suite", "--seed", "7", "--out", str(b), "--threads", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cloud_and_estikernel_commands(tmp_path):
    assert main(["cloud", "--set", "side=20", "--out", str(tmp_path / "c.json")]) == 0
    assert main(["estikernel", "--out", str(tmp_path / "e.json")]) == 0
    assert _report(tmp_path / "e.json")["verdicts"]["estikernel_sandwich"]


def test_mv_and_weights_commands(grid_file, tmp_path):
    assert main(["mv", "--space", str(grid_file), "--set", "potential=divergence", "--out",
                 str(tmp_path / "m.json")]) == 0
    assert main(["weights", "--space", str(grid_file), "--out", str(tmp_path / "w.json")]) == 0
    assert main(["analyze", "--space", str(grid_file), "--out", str(tmp_path / "a.json")]) == 0
    assert main(["green", "--space", str(grid_file), "--out", str(tmp_path / "g.json")]) == 0
