"""Scenario files: a line-oriented ``key = value`` header followed by
``[section]`` blocks.

Grammar (``#`` starts a comment)::

    name = fig4_temperature_spoof
    seed = 0                  # default 0
    bitrate = 500000          # default 500000, nominal bits/s
    duration = 150.5          # simulated seconds, required, > 0
    topology = default        # or "custom" with a [topology] section
    description = free text

    [config]                  # PlantConfig overrides, key = value
    telemetry_period = 0.1

    [topology]                # <kind> [axis] cmd=<id> status=<id>
    board cmd=0x010 status=0x011
    hotend cmd=0x1A0 status=0x1A1
    axis x cmd=0x200 status=0x201
    service 0x7E0

    [board]                   # <time> <command ...>
    0.1 set_target_temp 200

    [attack]                  # <time> <primitive> key=value ...
    150.0 sensor_spoof fake_temp=999 until=150.5

    [assert]                  # at T: | during T1 T2: | final:  <expression>
    at 150.3: board.fault
"""
import ast
import dataclasses
import os
import shlex
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .attacks import AttackScript, AttackStep
from .errors import ParseError
from .plant import (
    AXES,
    SERVICE_ID,
    ModuleDescriptor,
    ModuleKind,
    PlantConfig,
    Topology,
    default_topology,
    parse_command,
)

SCENARIO_DIR_ENV = "PRINTCAN_SCENARIO_DIR"
SCENARIO_SUFFIX = ".scn"

DEFAULT_SEED = 0
DEFAULT_BITRATE = 500_000

ASSERTION_FUNCTIONS = ("count", "captured", "destroyed", "abs", "min", "max", "round")

_KIND_WORDS = {
    "board": ModuleKind.MAIN_BOARD,
    "hotend": ModuleKind.HOTEND,
    "axis": ModuleKind.MOTION_AXIS,
    "limit": ModuleKind.LIMIT_SWITCH,
    "safety": ModuleKind.SAFETY,
    "camera": ModuleKind.CAMERA,
}

# primitive -> (required params, optional params)
PRIMITIVES = {
    "eavesdrop": ((), ("until",)),
    "spoof": (("id", "payload"), ("rate", "until")),
    "flood": (("until",), ("id", "payload")),
    "block": (("ids", "until"), ()),
    "replay": (("ids",), ("until", "from", "to")),
    "fuzz": (("id", "rate", "until"), ()),
    "inject": (("command",), ()),
    "block_and_spoof": (("commands", "until"), ()),
    "sensor_spoof": (("fake_temp", "until"), ("rate_multiplier", "hide")),
}


@dataclass(frozen=True)
class Assertion:
    kind: str  # "at" | "during" | "final"
    expr: str
    t1: float = None
    t2: float = None
    line: int = None

    @property
    def text(self):
        if self.kind == "at":
            return f"at {self.t1:g}: {self.expr}"
        if self.kind == "during":
            return f"during {self.t1:g} {self.t2:g}: {self.expr}"
        return f"final: {self.expr}"

    def names(self):
        tree = ast.parse(self.expr, mode="eval")
        return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)}

    def offline(self):
        """True when the expression depends on trace counts only."""
        return self.names() <= {"count", "abs", "min", "max", "round"}


@dataclass
class ScenarioSpec:
    name: str
    duration: float
    seed: int = DEFAULT_SEED
    bitrate: int = DEFAULT_BITRATE
    topology: Topology = field(default_factory=default_topology)
    config: PlantConfig = field(default_factory=PlantConfig)
    board_script: list = field(default_factory=list)  # [(seconds, Command)]
    attack: AttackScript = field(default_factory=AttackScript)
    assertions: list = field(default_factory=list)
    description: str = ""

    def __post_init__(self):
        if not self.duration > 0:
            raise ParseError("duration must be positive", field="duration")


def _number(text, line, key, kind=float):
    try:
        if kind is int:
            return int(text, 0)
        return float(text)
    except ValueError:
        raise ParseError(f"expected {'an integer' if kind is int else 'a number'}, got {text!r}", line, key) from None


def _ident(text, line, key):
    value = _number(text, line, key, int)
    if not 0 <= value <= 0x7FF:
        raise ParseError(f"identifier {text} outside 0..0x7FF", line, key)
    return value


def _bool(text, line, key):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ParseError(f"expected a boolean, got {text!r}", line, key)


def _config_value(default, text, line, key):
    if isinstance(default, bool):
        return _bool(text, line, key)
    if isinstance(default, int):
        return _number(text, line, key, int)
    if isinstance(default, float):
        return _number(text, line, key)
    if isinstance(default, tuple):
        return tuple(_number(p.strip(), line, key, int) for p in text.split(","))
    raise ParseError("unsupported config field", line, key)


def _parse_topology(lines):
    modules = []
    service = SERVICE_ID
    for lineno, text in lines:
        words = text.split()
        if words[0] == "service":
            if len(words) != 2:
                raise ParseError("expected: service <id>", lineno, "service")
            service = _ident(words[1], lineno, "service")
            continue
        kind = _KIND_WORDS.get(words[0])
        if kind is None:
            raise ParseError(f"unknown module kind {words[0]!r}", lineno, "topology")
        rest = words[1:]
        axis = None
        if kind in (ModuleKind.MOTION_AXIS, ModuleKind.LIMIT_SWITCH):
            if not rest or rest[0] not in AXES:
                raise ParseError(f"{words[0]} needs an axis (x/y/z)", lineno, "topology")
            axis, rest = rest[0], rest[1:]
        params = dict(_kv(w, lineno) for w in rest)
        if set(params) != {"cmd", "status"}:
            raise ParseError("module lines need cmd= and status=", lineno, "topology")
        modules.append(ModuleDescriptor(kind, _ident(params["cmd"], lineno, "cmd"),
                                        _ident(params["status"], lineno, "status"), axis))
    try:
        return Topology(tuple(modules), service)
    except ValueError as exc:
        line = lines[0][0] if lines else None
        raise ParseError(str(exc), line, "topology") from None


def _kv(word, lineno):
    if "=" not in word:
        raise ParseError(f"expected key=value, got {word!r}", lineno)
    key, value = word.split("=", 1)
    return key, value


def _parse_attack(lineno, text):
    try:
        words = shlex.split(text)
    except ValueError as exc:
        raise ParseError(str(exc), lineno, "attack") from None
    if len(words) < 2:
        raise ParseError("expected: <time> <primitive> key=value ...", lineno, "attack")
    start = _number(words[0], lineno, "time")
    primitive = words[1]
    if primitive not in PRIMITIVES:
        raise ParseError(f"unknown attack primitive {primitive!r}", lineno, "attack")
    required, optional = PRIMITIVES[primitive]
    raw = dict(_kv(w, lineno) for w in words[2:])
    missing = [k for k in required if k not in raw]
    if missing:
        raise ParseError(f"{primitive} is missing {', '.join(missing)}", lineno, missing[0])
    extra = [k for k in raw if k not in required + optional]
    if extra:
        raise ParseError(f"{primitive} does not take {', '.join(extra)}", lineno, extra[0])
    params = {}
    for key, value in raw.items():
        if key == "id":
            params[key] = _ident(value, lineno, key)
        elif key == "ids":
            params[key] = [_ident(v, lineno, key) for v in value.split(",") if v]
        elif key == "payload":
            try:
                params[key] = bytes.fromhex(value)
            except ValueError:
                raise ParseError(f"bad hex payload {value!r}", lineno, key) from None
            if len(params[key]) > 8:
                raise ParseError("payload longer than 8 bytes", lineno, key)
        elif key in ("until", "from", "to", "rate", "fake_temp"):
            params[key] = _number(value, lineno, key)
        elif key == "rate_multiplier":
            params[key] = _number(value, lineno, key, int)
        elif key == "hide":
            params[key] = _bool(value, lineno, key)
        elif key == "command":
            params[key] = parse_command(value)
        elif key == "commands":
            params[key] = [parse_command(c) for c in value.split(";") if c.strip()]
    if "until" in params and params["until"] <= start:
        raise ParseError("until must be after the start time", lineno, "until")
    if "rate" in params and params["rate"] <= 0:
        raise ParseError("rate must be positive", lineno, "rate")
    return AttackStep(start, primitive, params)


def _parse_assertion(lineno, text):
    head, sep, expr = text.partition(":")
    if not sep or not expr.strip():
        raise ParseError("expected '<when>: <expression>'", lineno, "assert")
    words = head.split()
    expr = expr.strip()
    if words == ["final"]:
        a = Assertion("final", expr, line=lineno)
    elif len(words) == 2 and words[0] == "at":
        a = Assertion("at", expr, _number(words[1], lineno, "at"), line=lineno)
    elif len(words) == 3 and words[0] == "during":
        t1, t2 = _number(words[1], lineno, "during"), _number(words[2], lineno, "during")
        if t2 < t1:
            raise ParseError("during window is reversed", lineno, "during")
        a = Assertion("during", expr, t1, t2, line=lineno)
    else:
        raise ParseError(f"unknown assertion timing {head.strip()!r}", lineno, "assert")
    try:
        a.names()
    except SyntaxError as exc:
        raise ParseError(f"bad expression: {exc.msg}", lineno, "assert") from None
    return a


def parse_scenario(text, source=None):
    header = {}
    sections = {"config": [], "topology": [], "board": [], "attack": [], "assert": []}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip() if not raw.lstrip().startswith("#") else ""
        if current == "assert" or current == "attack":
            line = _strip_comment_keep_quotes(raw)
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in sections:
                raise ParseError(f"unknown section [{current}]", lineno)
            continue
        if current is None:
            key, sep, value = line.partition("=")
            if not sep:
                raise ParseError("expected key = value", lineno)
            key = key.strip()
            if key in header:
                raise ParseError("duplicate key", lineno, key)
            header[key] = (lineno, value.strip())
        else:
            sections[current].append((lineno, line))

    known = {"name", "seed", "bitrate", "duration", "topology", "description"}
    for key, (lineno, _) in header.items():
        if key not in known:
            raise ParseError("unknown header key", lineno, key)
    if "name" not in header:
        raise ParseError("missing required key", None, "name")
    if "duration" not in header:
        raise ParseError("missing required key", None, "duration")

    name = header["name"][1]
    lineno, value = header["duration"]
    duration = _number(value, lineno, "duration")
    if not duration > 0:
        raise ParseError(f"duration must be positive, got {value}", lineno, "duration")
    seed = DEFAULT_SEED
    if "seed" in header:
        lineno, value = header["seed"]
        seed = _number(value, lineno, "seed", int)
        if seed < 0:
            raise ParseError("seed must be nonnegative", lineno, "seed")
    bitrate = DEFAULT_BITRATE
    if "bitrate" in header:
        lineno, value = header["bitrate"]
        bitrate = _number(value, lineno, "bitrate", int)
        if bitrate <= 0:
            raise ParseError("bitrate must be positive", lineno, "bitrate")

    topology_mode = header.get("topology", (None, "default"))[1]
    if topology_mode == "default":
        if sections["topology"]:
            raise ParseError("[topology] given but topology = default", sections["topology"][0][0], "topology")
        topology = default_topology()
    elif topology_mode == "custom":
        if not sections["topology"]:
            raise ParseError("topology = custom needs a [topology] section", header["topology"][0], "topology")
        topology = _parse_topology(sections["topology"])
    else:
        raise ParseError(f"unknown topology {topology_mode!r}", header["topology"][0], "topology")

    config = PlantConfig()
    fields = {f.name: f for f in dataclasses.fields(PlantConfig)}
    overrides = {}
    for lineno, line in sections["config"]:
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in fields:
            raise ParseError("unknown config key", lineno, key)
        overrides[key] = _config_value(getattr(config, key), value.strip(), lineno, key)
    config = config.replace(**overrides)

    board_script = []
    for lineno, line in sections["board"]:
        time_text, _, command = line.partition(" ")
        t = _number(time_text, lineno, "time")
        try:
            board_script.append((t, parse_command(command)))
        except ParseError as exc:
            raise ParseError(str(exc), lineno, "board") from None

    steps = []
    for lineno, line in sections["attack"]:
        try:
            steps.append(_parse_attack(lineno, line))
        except ParseError as exc:
            if exc.line is None:
                raise ParseError(str(exc), lineno, "attack") from None
            raise
    try:
        attack = AttackScript(steps)
    except ValueError as exc:
        raise ParseError(str(exc), None, "attack") from None

    assertions = [_parse_assertion(lineno, line) for lineno, line in sections["assert"]]
    allowed = {m.name for m in topology.modules} | set(ASSERTION_FUNCTIONS)
    if steps:
        allowed.add("attacker")
    for a in assertions:
        unknown = a.names() - allowed
        if unknown:
            raise ParseError(f"assertion references undeclared name(s) {', '.join(sorted(unknown))}", a.line, "assert")

    return ScenarioSpec(
        name=name,
        duration=duration,
        seed=seed,
        bitrate=bitrate,
        topology=topology,
        config=config,
        board_script=board_script,
        attack=attack,
        assertions=assertions,
        description=header.get("description", (None, ""))[1],
    )


def _strip_comment_keep_quotes(raw):
    quote = None
    for i, ch in enumerate(raw):
        if ch in "\"'" and quote in (None, ch):
            quote = None if quote else ch
        elif ch == "#" and quote is None:
            return raw[:i].strip()
    return raw.strip()


def load_scenario(path):
    path = Path(path)
    return parse_scenario(path.read_text(), source=str(path))


def scenario_dir():
    """Directory holding the scenario corpus (env override or bundled)."""
    env = os.environ.get(SCENARIO_DIR_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("printcan") / "scenarios"))


def list_scenarios(directory=None):
    directory = Path(directory) if directory else scenario_dir()
    return sorted(p.stem for p in directory.glob(f"*{SCENARIO_SUFFIX}"))


def find_scenario(name_or_path):
    """Resolve a path, or a bare corpus name, to a scenario file path."""
    path = Path(name_or_path)
    if path.is_file():
        return path
    candidate = scenario_dir() / f"{name_or_path}{SCENARIO_SUFFIX}"
    if candidate.is_file():
        return candidate
    raise FileNotFoundError(f"no scenario file or corpus entry named {name_or_path!r}")
