import dataclasses
import json
from pathlib import Path

import pytest

from printcan.attacks import AttackScript
from printcan.errors import UnknownId
from printcan.plant import PRIVATE, SAFETY_CRITICAL, SECURITY, default_topology
from printcan.runner import ExpressionError, classify_frame, evaluate, execute, report_json, run_scenario, verify
from printcan.scenario import find_scenario, list_scenarios, load_scenario, parse_scenario
from printcan.trace import format_trace, read_trace

DATA = Path(__file__).parent / "data"


def load(name):
    return load_scenario(find_scenario(name))


@pytest.mark.parametrize(
    ("ident", "category"),
    [(0x201, PRIVATE), (0x200, PRIVATE), (0x011, PRIVATE), (0x1A1, SAFETY_CRITICAL), (0x1A0, SAFETY_CRITICAL),
     (0x051, SAFETY_CRITICAL), (0x041, SAFETY_CRITICAL), (0x010, SAFETY_CRITICAL), (0x301, SECURITY),
     (0x300, SECURITY), (0x7E0, SECURITY)],
)
def test_classify(ident, category):
    assert classify_frame(ident, default_topology()) == category


def test_classify_unknown():
    with pytest.raises(UnknownId):
        classify_frame(0x000, default_topology())


def test_every_topology_id_has_one_category():
    topo = default_topology()
    for ident in topo.roles():
        assert classify_frame(ident, topo) in (PRIVATE, SAFETY_CRITICAL, SECURITY)


def test_evaluator_subset():
    ns = {"x": 3, "abs": abs}
    assert evaluate("abs(x - 5) == 2 and not x > 3", ns)
    assert evaluate("1 < x <= 3", ns)
    for bad in ("x[0]", "__import__('os')", "[i for i in x]", "lambda: 1", "x if x else 0"):
        with pytest.raises(ExpressionError):
            evaluate(bad, ns)


def test_fig4_report():
    trace, report = run_scenario(load("fig4_temperature_spoof"))
    assert report["passed"]
    assert report["compromised"] == {PRIVATE: False, SAFETY_CRITICAL: True, SECURITY: False}
    (entry,) = report["categories"][SAFETY_CRITICAL]
    assert entry["primitive"] == "scenario2_sensor_spoof/spoof" and entry["ids"] == ["0x1A1"]
    assert report["final_state"]["board"]["displayed_temp"] == 999
    assert 195 <= report["final_state"]["hotend"]["temp_c"] <= 205


def test_baseline_has_no_findings():
    trace, report = run_scenario(load("baseline"))
    assert report["passed"]
    assert all(v == [] for v in report["categories"].values())
    assert report["uncategorized"] == [] and report["faults"] == []


@pytest.mark.parametrize("name", list_scenarios())
def test_bundled_scenarios_pass(name):
    _, report = run_scenario(load(name))
    assert report["passed"], [v for v in report["verdicts"] if not v["passed"]] + report["faults"]


def test_report_completeness():
    run = execute(load("melt_and_hide_filter"))
    report = run.impact
    entries = [(e["primitive"], i) for cat in report["categories"].values() for e in cat for i in e["ids"]]
    entries += [(e["primitive"], i) for e in report["uncategorized"] for i in e["ids"]]
    assert len(entries) == len(set(entries))
    names = {e for e, _ in entries} | {e["primitive"] for e in report["uncategorized"]}
    assert names == {r.name for r in run.attacker.records}


def test_flood_source_id_uncategorized():
    _, report = run_scenario(load("flood_dos"))
    (entry,) = report["uncategorized"]
    assert entry["ids"] == ["0x000"] and entry["evidence"]["0x000"] > 1000


def test_failing_assertion_and_bad_expression():
    spec = parse_scenario(
        "name = f\nduration = 0.2\n[assert]\nfinal: board.fault\nfinal: board.missing_field\n"
    )
    _, report = run_scenario(spec)
    assert [v["passed"] for v in report["verdicts"]] == [False, False]
    assert not report["passed"] and report["faults"]


def test_during_assertion_catches_transient():
    spec = parse_scenario(
        "name = d\nduration = 2\n[board]\n1.0 kill\n[assert]\nduring 0.5 1.5: not board.fault\nduring 0.2 0.9: not board.fault\n"
    )
    _, report = run_scenario(spec)
    assert [v["passed"] for v in report["verdicts"]] == [False, True]


def test_seed_override_changes_fuzz_only():
    a, _ = run_scenario(load("limit_fuzz"), seed=1)
    b, _ = run_scenario(load("limit_fuzz"), seed=1)
    c, _ = run_scenario(load("limit_fuzz"), seed=2)
    assert a == b and a != c


def test_registration_failure_is_reported_not_raised():
    spec = parse_scenario(
        "name = r\nduration = 0.2\n[attack]\n0.0 block ids=0x1A1 until=0.1\n[assert]\nfinal: board.registered_count == 6\n"
    )
    _, report = run_scenario(spec)
    assert report["passed"]
    assert any("hotend" in f for f in report["faults"])


def test_verify_flood_trace():
    spec = load("flood_dos")
    trace, _ = run_scenario(spec)
    results = verify(trace, spec.assertions)
    assert [ok for _, ok in results] == [True, True, True]


def test_verify_detects_tampering():
    spec = load("flood_dos")
    trace, _ = run_scenario(spec)
    tampered = [r for r in trace if r.id != 0x000]
    assert [ok for _, ok in verify(tampered, spec.assertions)][2] is False


def test_online_and_offline_counts_agree():
    # registration response plus telemetry at 0.05 s + k * 0.1 s
    spec = parse_scenario(
        "name = c\nduration = 3\n[assert]\nat 1.0: count(id=0x1A1) == 11\nfinal: count(id=0x1A1, t1=1.0, t2=2.0) == 10\n"
        "during 0.5 2.5: count(id=0x1A1, t1=0.0, t2=0.5) == 6\n"
    )
    trace, report = run_scenario(spec)
    online = [v["passed"] for v in report["verdicts"]]
    offline = [ok for _, ok in verify(trace, spec.assertions)]
    assert online == offline == [True, True, True]


def test_golden_fig4_trace_is_reproduced_and_verifies():
    spec = load("fig4_temperature_spoof")
    golden = (DATA / "fig4_golden.log").read_text()
    trace, _ = run_scenario(spec)
    assert format_trace(trace) == golden
    results = verify(read_trace(DATA / "fig4_golden.log"), spec.assertions)
    assert all(ok is not False for _, ok in results)
    assert any(ok is True for _, ok in results)


def test_report_json_deterministic():
    spec = load("melt_and_hide")
    one = report_json(run_scenario(spec)[1])
    two = report_json(run_scenario(spec)[1])
    assert one == two
    assert json.loads(one)["scenario"] == "melt_and_hide"


def test_no_attack_no_attacker():
    spec = dataclasses.replace(load("fig4_temperature_spoof"), attack=AttackScript([]), assertions=[])
    run = execute(spec)
    assert run.attacker is None
    assert not run.impact["compromised"][SAFETY_CRITICAL]
