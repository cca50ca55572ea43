import subprocess
import sys

from printcan.cli import main
from printcan.scenario import list_scenarios


def test_list(capsys):
    assert main(["list-scenarios"]) == 0
    assert capsys.readouterr().out.split() == list_scenarios()


def test_run_writes_artifacts(tmp_path, capsys):
    trace, report = tmp_path / "t.log", tmp_path / "r.json"
    assert main(["run", "calibration_spoof", "--trace", str(trace), "--report", str(report)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    assert trace.read_text().startswith("(0000000000.")
    assert '"passed": true' in report.read_text()


def test_run_failing_scenario_exit_code(tmp_path):
    path = tmp_path / "bad.scn"
    path.write_text("name = bad\nduration = 0.1\n[assert]\nfinal: board.fault\n")
    assert main(["run", str(path)]) == 1


def test_verify(tmp_path, capsys):
    trace = tmp_path / "t.log"
    main(["run", "flood_dos", "--trace", str(trace)])
    capsys.readouterr()
    assert main(["verify", str(trace), "flood_dos"]) == 0
    assert capsys.readouterr().out.count("PASS") == 3


def test_verify_malformed_trace(tmp_path):
    trace = tmp_path / "t.log"
    trace.write_text("not a trace\n")
    assert main(["verify", str(trace), "flood_dos"]) == 2


def test_unknown_scenario_and_parse_error(tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("name = bad\nduration = -1\n")
    for arg in ("no_such_scenario", str(bad)):
        proc = subprocess.run([sys.executable, "-m", "printcan", "run", arg], capture_output=True, text=True)
        assert proc.returncode != 0 and "printcan:" in proc.stderr
