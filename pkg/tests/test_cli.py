"""Command-line interface tests: output contracts, exit codes, determinism."""

import json
import os

import pytest

from zsource_lab.cli import main
from zsource_lab.harness import builtin_scenario


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_table3_point(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--k", "2", "--p", "2",
                           "--d", "0.4", "--vdc", "20")
    assert code == 0
    assert "B = 5" in out
    assert "V_pn = 100" in out


def test_analyze_infeasible_duty_names_bound(capsys):
    code, out, err = run_cli(capsys, "analyze", "--k", "2", "--p", "2",
                             "--d", "0.6", "--vdc", "20")
    assert code == 1
    assert "0.5" in err       # names the d_max bound


def test_analyze_unity(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--k", "1", "--p", "1",
                           "--d", "0", "--vdc", "48")
    assert code == 0
    assert "B = 1" in out


def test_analyze_json_deterministic(capsys):
    args = ["analyze", "--k", "2", "--p", "2", "--d", "0.4", "--vdc", "20",
            "--m", "0.5", "--json", "--repro"]
    code, out1, _ = run_cli(capsys, *args)
    code, out2, _ = run_cli(capsys, *args)
    assert code == 0
    assert out1 == out2
    doc = json.loads(out1)
    assert doc["B"] == pytest.approx(5.0)
    assert doc["V_ac_peak"] == pytest.approx(25.0)
    assert "meta" not in doc


def test_design_points(capsys):
    code, out, _ = run_cli(capsys, "design", "--boost", "5",
                           "--turns", "1:2:2")
    assert code == 0 and "d = 0.4" in out
    code, out, _ = run_cli(capsys, "design", "--boost", "5",
                           "--turns", "1:3.4:1")
    assert code == 0 and "d = 0.25" in out
    code, out, _ = run_cli(capsys, "design", "--boost", "1",
                           "--turns", "1:2:2")
    assert code == 0 and "d = 0" in out


def test_design_unreachable_gain(capsys):
    code, _, err = run_cli(capsys, "design", "--boost", "0.5",
                           "--turns", "1:2:2")
    assert code == 1
    assert "unreachable" in err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--k", "2"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["design", "--boost", "5", "--turns", "1:2"])
    assert exc.value.code == 2


def test_parse_ok_and_canon(capsys, tmp_path):
    net = tmp_path / "ok.net"
    net.write_text("v1 in 0 dc=20\nr1 in 0 r=245\n")
    canon = tmp_path / "canon.net"
    code, out, _ = run_cli(capsys, "parse", str(net), "--canon", str(canon))
    assert code == 0
    assert "2 elements" in out
    assert canon.read_text().splitlines()[1] == "v1 in 0 dc=20"


def test_parse_diagnostics_exit_one(capsys, tmp_path):
    net = tmp_path / "bad.net"
    net.write_text("v1 in 0 dc=20\nbogus a b c\n")
    code, _, err = run_cli(capsys, "parse", str(net))
    assert code == 1
    assert f"{net}:2: E_KIND" in err


def test_case_quick_writes_files(capsys, tmp_path):
    out_dir = tmp_path / "out"
    code, out, _ = run_cli(capsys, "case", "case3_dcdc",
                           "--out", str(out_dir),
                           "--t-end", "0.02", "--dt", "5e-7")
    assert code == 0
    assert "B_meas" in out
    names = sorted(os.listdir(out_dir))
    assert "trace.csv" in names
    assert "report.json" in names
    assert "report.txt" in names
    assert any(n.endswith(".png") for n in names)
    doc = json.loads((out_dir / "report.json").read_text())
    assert doc["scenario"] == "case3_dcdc"


def test_simulate_scenario_file(capsys, tmp_path):
    sc = builtin_scenario("case3_dcdc", dt=5e-7, t_end=0.01, stride=10)
    path = tmp_path / "scenario.json"
    path.write_text(sc.to_json())
    out_dir = tmp_path / "simout"
    code, out, _ = run_cli(capsys, "simulate", str(path),
                           "--out", str(out_dir), "--json", "--repro")
    assert code == 0
    doc = json.loads(out)
    assert doc["scenario"] == "case3_dcdc"
    assert (out_dir / "trace.csv").exists()


def test_steady_subcommand(capsys):
    code, out, _ = run_cli(capsys, "steady", "case3_dcdc", "--dt", "5e-7",
                           "--json", "--repro")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["periodic_state"]) > 4


def test_compare_smoke(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "compare", "--t-end", "0.005",
                           "--out", str(tmp_path), "--json", "--repro")
    assert code == 0
    doc = json.loads(out)
    assert set(doc["cases"]) == {"case1_motor", "case2_generator",
                                 "case3_dcdc"}
    assert (tmp_path / "compare.json").exists()


def test_analyze_golden_output(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--k", "1", "--p", "1",
                           "--d", "0.25", "--vdc", "48", "--json", "--repro")
    assert code == 0
    assert out == ('{"B": 2.0, "V_C1": 24.0, "V_C2": 72.0, '
                   '"V_L1_nst": -12.0, "V_Lr_nst": -24.0, "V_pn": 96.0, '
                   '"d_max": 0.5}\n')
