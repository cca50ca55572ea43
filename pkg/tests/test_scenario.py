import pytest

from printcan.errors import ParseError
from printcan.plant import ModuleKind, PlantConfig, default_topology
from printcan.scenario import (
    DEFAULT_BITRATE,
    ScenarioSpec,
    find_scenario,
    list_scenarios,
    load_scenario,
    parse_scenario,
    scenario_dir,
)

# Each data category row of the attack matrix and the scenarios covering it.
MATRIX = {
    "STL/GCode data": ["gcode_eavesdrop"],
    "printer status": ["printer_status"],
    "user preferences/settings": ["settings_eavesdrop"],
    "device calibration": ["calibration_spoof"],
    "temperature/sensor data": ["fig4_temperature_spoof", "melt_and_hide"],
    "target temperature": ["target_temp_spoof", "melt_and_hide"],
    "limit switches/position": ["limit_fuzz", "position_spoof", "calibration_spoof"],
    "safety devices": ["safety_block", "melt_and_hide_filter"],
    "general data/commands DoS": ["flood_dos", "fault_halt_block", "fan_denial"],
    "cameras/monitoring": ["camera_dos"],
    "module firmware": ["reflash_spoof"],
    "settings/config data": ["config_spoof", "settings_eavesdrop"],
}


def test_minimal_defaults():
    spec = parse_scenario("name = x\nduration = 1\n")
    assert spec.seed == 0 and spec.bitrate == DEFAULT_BITRATE
    assert spec.topology == default_topology()
    assert spec.config == PlantConfig()
    assert spec.attack.steps == [] and spec.assertions == [] and spec.board_script == []


@pytest.mark.parametrize(
    ("text", "field"),
    [
        ("name = x\nduration = -5\n", "duration"),
        ("name = x\n", "duration"),
        ("duration = 1\n", "name"),
        ("name = x\nduration = 1\nseed = -1\n", "seed"),
        ("name = x\nduration = 1\nbitrate = fast\n", "bitrate"),
        ("name = x\nduration = 1\ncolour = red\n", "colour"),
        ("name = x\nduration = 1\n[config]\nk_heat = hot\n", "k_heat"),
        ("name = x\nduration = 1\n[config]\nwarp = 9\n", "warp"),
        ("name = x\nduration = 1\n[attack]\n1.0 teleport\n", "attack"),
        ("name = x\nduration = 1\n[attack]\n1.0 spoof id=0x900 payload=00\n", "id"),
        ("name = x\nduration = 1\n[attack]\n1.0 spoof payload=00\n", "id"),
        ("name = x\nduration = 1\n[attack]\n1.0 flood until=0.5\n", "until"),
        ("name = x\nduration = 1\n[attack]\n1.0 eavesdrop colour=red\n", "colour"),
        ("name = x\nduration = 1\n[attack]\n1.0 eavesdrop\n0.5 eavesdrop\n", "attack"),
        ("name = x\nduration = 1\n[assert]\nfinal: nozzle.temp_c > 0\n", "assert"),
        ("name = x\nduration = 1\n[assert]\nsometime: True\n", "assert"),
        ("name = x\nduration = 1\n[assert]\nfinal: board.fault ==\n", "assert"),
        ("name = x\nduration = 1\n[assert]\nfinal: attacker.transmitted == 0\n", "assert"),
        ("name = x\nduration = 1\n[board]\n0.5 fly away\n", "board"),
        ("name = x\nduration = 1\n[nonsense]\n", None),
        ("name = x\nduration = 1\ntopology = custom\n", "topology"),
    ],
)
def test_parse_errors_carry_field(text, field):
    with pytest.raises(ParseError) as err:
        parse_scenario(text)
    assert err.value.field == field


def test_parse_error_line_number():
    with pytest.raises(ParseError) as err:
        parse_scenario("name = x\nduration = 1\n\n[attack]\n# comment\n1.0 teleport\n")
    assert err.value.line == 6


def test_custom_topology():
    spec = parse_scenario(
        "name = t\nduration = 1\ntopology = custom\n"
        "[topology]\nboard cmd=0x020 status=0x021\nhotend cmd=0x100 status=0x101\naxis x cmd=0x200 status=0x201\nservice 0x7F0\n"
        "[assert]\nfinal: hotend.temp_c > 0 and axis_x.logical_position >= 0\n"
    )
    assert [m.name for m in spec.topology.modules] == ["board", "hotend", "axis_x"]
    assert spec.topology.service_id == 0x7F0
    assert spec.topology.find(ModuleKind.MOTION_AXIS, "x").command_id == 0x200


def test_custom_topology_duplicate_ids():
    with pytest.raises(ParseError):
        parse_scenario("name = t\nduration = 1\ntopology = custom\n[topology]\nboard cmd=0x020 status=0x021\nhotend cmd=0x020 status=0x101\n")


def test_attack_parameters_typed():
    spec = parse_scenario(
        "name = a\nduration = 10\n[attack]\n"
        '1.0 block_and_spoof commands="set_target_temp 280; set_fan off" until=5  # trailing comment\n'
        "2.0 sensor_spoof fake_temp=200 until=5 hide=true rate_multiplier=4\n"
        "3.0 replay ids=0x041,0x051 from=0 to=0.05\n"
        "4.0 spoof id=0x1A1 payload=810C80 rate=50 until=4.5\n"
    )
    s1, s2, s3, s4 = spec.attack.steps
    assert [str(c) for c in s1.params["commands"]] == ["set_target_temp 280.0", "set_fan False"]
    assert s2.params == {"fake_temp": 200.0, "until": 5.0, "hide": True, "rate_multiplier": 4}
    assert s3.params["ids"] == [0x041, 0x051]
    assert s4.params["payload"] == bytes.fromhex("810C80")


def test_config_overrides():
    spec = parse_scenario("name = c\nduration = 1\n[config]\ntelemetry_period = 0.2\naxis_start = 1, 2, 3\n")
    assert spec.config.telemetry_period == 0.2 and spec.config.axis_start == (1, 2, 3)


def test_assertion_forms():
    spec = parse_scenario(
        "name = a\nduration = 2\n[assert]\nat 1.5: board.fault\nduring 0.5 1.0: not board.fault\nfinal: count(id=0x1A1) > 0\n"
    )
    kinds = [(a.kind, a.t1, a.t2) for a in spec.assertions]
    assert kinds == [("at", 1.5, None), ("during", 0.5, 1.0), ("final", None, None)]
    assert spec.assertions[2].offline() and not spec.assertions[0].offline()


def test_spec_invariant_duration():
    with pytest.raises(ParseError):
        ScenarioSpec(name="x", duration=0)


def test_bundled_fig4():
    spec = load_scenario(find_scenario("fig4_temperature_spoof"))
    (step,) = spec.attack.steps
    assert step.primitive == "sensor_spoof" and step.params["fake_temp"] == 999


def test_every_bundled_scenario_parses():
    names = list_scenarios()
    assert len(names) >= 12
    for name in names:
        spec = load_scenario(scenario_dir() / f"{name}.scn")
        assert spec.name == name
        assert spec.assertions


def test_matrix_rows_are_covered():
    bundled = set(list_scenarios())
    for row, names in MATRIX.items():
        assert names and set(names) <= bundled, row


def test_scenario_dir_env(tmp_path, monkeypatch):
    (tmp_path / "mine.scn").write_text("name = mine\nduration = 1\n")
    monkeypatch.setenv("PRINTCAN_SCENARIO_DIR", str(tmp_path))
    assert list_scenarios() == ["mine"]
    assert find_scenario("mine") == tmp_path / "mine.scn"
    with pytest.raises(FileNotFoundError):
        find_scenario("fig4_temperature_spoof")
