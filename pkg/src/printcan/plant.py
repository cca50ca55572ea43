"""Printer modules on the bus: main board, hotend, motion, limit switch,
safety module and camera monitor.

Every module owns one :class:`~printcan.node.Node`. Identifier parity
carries direction: even IDs are commands (consumed by modules), odd IDs are
status frames (consumed by the main board). Each module therefore needs a
single mask/match filter on bit 0 and dispatches on the exact ID in software.
"""
import dataclasses
import shlex
import struct
from dataclasses import dataclass, field
from enum import Enum

from .errors import BusOff, ParseError
from .frame import DataFrame, check_id
from .node import AcceptanceFilter, Node

COMMAND_FILTER = AcceptanceFilter(0x001, 0x000)
STATUS_FILTER = AcceptanceFilter(0x001, 0x001)

SERVICE_ID = 0x7E0

# opcodes, first payload byte
OP_ENUMERATE = 0x01
OP_HALT = 0x02
OP_SET_TARGET_TEMP = 0x10
OP_SET_FAN = 0x11
OP_MOVE = 0x20
OP_HOME = 0x21
OP_SET_ZERO = 0x22
OP_SET_FILTER = 0x30
OP_KILL_SWITCH = 0x31
OP_REFLASH = 0x40
OP_SET_CAMERA = 0x50
OP_SET_CONFIG = 0x51
ST_BOARD = 0x80
ST_HOTEND = 0x81
ST_AXIS = 0x82
ST_LIMIT = 0x83
ST_SAFETY = 0x84
ST_CAMERA = 0x85

AXES = ("x", "y", "z")


class ModuleKind(str, Enum):
    MAIN_BOARD = "MainBoard"
    HOTEND = "Hotend"
    MOTION_AXIS = "MotionAxis"
    LIMIT_SWITCH = "LimitSwitch"
    SAFETY = "SafetyModule"
    CAMERA = "CameraMonitor"


_KIND_BASE = {
    ModuleKind.MAIN_BOARD: 0x00,
    ModuleKind.HOTEND: 0x01,
    ModuleKind.MOTION_AXIS: 0x10,
    ModuleKind.LIMIT_SWITCH: 0x20,
    ModuleKind.SAFETY: 0x30,
    ModuleKind.CAMERA: 0x40,
}
_AXIAL = (ModuleKind.MOTION_AXIS, ModuleKind.LIMIT_SWITCH)


def kind_code(kind, axis=None):
    code = _KIND_BASE[kind]
    if kind in _AXIAL:
        code += AXES.index(axis)
    return code


def kind_from_code(code):
    """Inverse of :func:`kind_code`; ``None`` for codes no module uses."""
    for kind, base in _KIND_BASE.items():
        if kind in _AXIAL:
            if base <= code < base + len(AXES):
                return kind, AXES[code - base]
        elif code == base:
            return kind, None
    return None


def module_name(kind, axis=None):
    return {
        ModuleKind.MAIN_BOARD: "board",
        ModuleKind.HOTEND: "hotend",
        ModuleKind.SAFETY: "safety",
        ModuleKind.CAMERA: "camera",
        ModuleKind.MOTION_AXIS: f"axis_{axis}",
        ModuleKind.LIMIT_SWITCH: f"limit_{axis}",
    }[kind]


@dataclass(frozen=True)
class ModuleDescriptor:
    kind: ModuleKind
    command_id: int
    status_id: int
    axis: str = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModuleKind(self.kind))
        check_id(self.command_id)
        check_id(self.status_id)
        if (self.kind in _AXIAL) != (self.axis is not None):
            raise ValueError(f"{self.kind.value} axis must be {'one of x/y/z' if self.kind in _AXIAL else 'None'}")
        if self.axis is not None and self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}")

    @property
    def name(self):
        return module_name(self.kind, self.axis)

    @property
    def kind_code(self):
        return kind_code(self.kind, self.axis)


# Asset category for every (kind, direction); IDs outside the table are
# reported as unknown.
PRIVATE = "PrivateData"
SAFETY_CRITICAL = "SafetyCritical"
SECURITY = "SecurityData"
CATEGORIES = (PRIVATE, SAFETY_CRITICAL, SECURITY)

CATEGORY_TABLE = {
    (ModuleKind.MAIN_BOARD, "command"): SAFETY_CRITICAL,
    (ModuleKind.MAIN_BOARD, "status"): PRIVATE,
    (ModuleKind.HOTEND, "command"): SAFETY_CRITICAL,
    (ModuleKind.HOTEND, "status"): SAFETY_CRITICAL,
    (ModuleKind.MOTION_AXIS, "command"): PRIVATE,
    (ModuleKind.MOTION_AXIS, "status"): PRIVATE,
    (ModuleKind.LIMIT_SWITCH, "command"): SAFETY_CRITICAL,
    (ModuleKind.LIMIT_SWITCH, "status"): SAFETY_CRITICAL,
    (ModuleKind.SAFETY, "command"): SAFETY_CRITICAL,
    (ModuleKind.SAFETY, "status"): SAFETY_CRITICAL,
    (ModuleKind.CAMERA, "command"): SECURITY,
    (ModuleKind.CAMERA, "status"): SECURITY,
    ("service", "command"): SECURITY,
}


@dataclass(frozen=True)
class IdRole:
    kind: object  # ModuleKind, "service", or None when unknown
    direction: str  # "command" | "status" | "telemetry"
    axis: str = None
    confidence: float = 1.0


@dataclass(frozen=True)
class Topology:
    modules: tuple
    service_id: int = SERVICE_ID

    def __post_init__(self):
        modules = tuple(self.modules)
        object.__setattr__(self, "modules", modules)
        boards = [m for m in modules if m.kind is ModuleKind.MAIN_BOARD]
        if len(boards) != 1:
            raise ValueError(f"topology needs exactly one MainBoard, found {len(boards)}")
        ids = [self.service_id]
        for m in modules:
            ids += [m.command_id, m.status_id]
        if len(set(ids)) != len(ids):
            raise ValueError("command/status/service identifiers must be unique")
        board = boards[0]
        if any(m.command_id < board.command_id for m in modules):
            raise ValueError("the MainBoard must hold the lowest command_id")
        for m in modules:
            if m.command_id % 2 or not m.status_id % 2 or self.service_id % 2:
                raise ValueError(f"{m.name}: command IDs must be even and status IDs odd")
        names = [m.name for m in modules]
        if len(set(names)) != len(names):
            raise ValueError("module names must be unique")

    @property
    def board(self):
        return next(m for m in self.modules if m.kind is ModuleKind.MAIN_BOARD)

    @property
    def peripherals(self):
        return tuple(m for m in self.modules if m.kind is not ModuleKind.MAIN_BOARD)

    def by_name(self, name):
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(name)

    def find(self, kind, axis=None):
        for m in self.modules:
            if m.kind is kind and m.axis == axis:
                return m
        return None

    def roles(self):
        """Ground-truth role of every identifier in the topology."""
        table = {self.service_id: IdRole("service", "command")}
        for m in self.modules:
            table[m.command_id] = IdRole(m.kind, "command", m.axis)
            table[m.status_id] = IdRole(m.kind, "status", m.axis)
        return table

    def registration_roles(self):
        """Roles recoverable from a registration capture alone."""
        b = self.board
        table = {b.command_id: IdRole(b.kind, "command")}
        for m in self.peripherals:
            table[m.command_id] = IdRole(m.kind, "command", m.axis)
            table[m.status_id] = IdRole(m.kind, "status", m.axis)
        return table


def default_topology():
    """MainBoard plus seven peripherals."""
    return Topology(
        (
            ModuleDescriptor(ModuleKind.MAIN_BOARD, 0x010, 0x011),
            ModuleDescriptor(ModuleKind.SAFETY, 0x040, 0x041),
            ModuleDescriptor(ModuleKind.LIMIT_SWITCH, 0x050, 0x051, "x"),
            ModuleDescriptor(ModuleKind.HOTEND, 0x1A0, 0x1A1),
            ModuleDescriptor(ModuleKind.MOTION_AXIS, 0x200, 0x201, "x"),
            ModuleDescriptor(ModuleKind.MOTION_AXIS, 0x210, 0x211, "y"),
            ModuleDescriptor(ModuleKind.MOTION_AXIS, 0x220, 0x221, "z"),
            ModuleDescriptor(ModuleKind.CAMERA, 0x300, 0x301),
        )
    )


# -- payload formats ------------------------------------------------------

def encode_temp(celsius):
    """16-bit signed big-endian fixed point, 1/16 degC per LSB."""
    raw = round(celsius * 16)
    if not -0x8000 <= raw <= 0x7FFF:
        raise ValueError(f"temperature {celsius} outside the fixed-point range")
    return struct.pack(">h", raw)


def decode_temp(data):
    return struct.unpack(">h", bytes(data[:2]))[0] / 16


def encode_steps(steps):
    return struct.pack(">i", steps)


def decode_steps(data):
    return struct.unpack(">i", bytes(data[:4]))[0]


def temperature_frame(status_id, celsius):
    return DataFrame(status_id, bytes([ST_HOTEND]) + encode_temp(celsius))


# -- commands -------------------------------------------------------------

_ON = {"on": True, "true": True, "1": True, "off": False, "false": False, "0": False}


def _flag(text):
    try:
        return _ON[text.lower()]
    except KeyError:
        raise ParseError(f"expected on/off, got {text!r}") from None


@dataclass(frozen=True)
class Command:
    """A printer command independent of the identifiers it travels on."""

    name: str
    args: tuple = ()

    def __str__(self):
        return " ".join((self.name,) + tuple(str(a) for a in self.args))


def parse_command(text):
    words = shlex.split(text)
    if not words:
        raise ParseError("empty command")
    name, rest = words[0].lower(), words[1:]
    want = {
        "set_target_temp": 1,
        "set_fan": 1,
        "set_filter": 1,
        "kill": 0,
        "move": 2,
        "home": 1,
        "set_zero": 1,
        "set_camera": 1,
        "set_config": 2,
        "reflash": 2,
        "halt": 0,
    }
    if name not in want:
        raise ParseError(f"unknown command {name!r}")
    if len(rest) != want[name]:
        raise ParseError(f"{name} takes {want[name]} argument(s), got {len(rest)}")
    try:
        if name == "set_target_temp":
            args = (float(rest[0]),)
        elif name in ("set_fan", "set_filter", "set_camera"):
            args = (_flag(rest[0]),)
        elif name == "move":
            args = (rest[0], int(rest[1]))
        elif name == "reflash":
            digest = bytes.fromhex(rest[1])
            if len(digest) != 4:
                raise ParseError("reflash digest must be 4 bytes of hex")
            args = (rest[0], digest.hex())
        else:
            args = tuple(rest)
    except ValueError as exc:
        raise ParseError(f"bad argument for {name}: {exc}") from None
    if name in ("move", "home", "set_zero") and args[0] not in AXES:
        raise ParseError(f"unknown axis {args[0]!r}")
    if name == "set_config" and len(args[1].encode()) > 7:
        raise ParseError("set_config text is limited to 7 bytes")
    return Command(name, args)


def command_frame(command, lookup, service_id=SERVICE_ID):
    """Build the frame for ``command``.

    ``lookup(kind, axis)`` returns the target's ModuleDescriptor or None;
    it may be backed by the real topology or by an inferred ID map.
    """
    if isinstance(command, str):
        command = parse_command(command)
    name, args = command.name, command.args

    def target(kind, axis=None):
        desc = lookup(kind, axis)
        if desc is None:
            raise KeyError(f"no {kind.value}{'(' + axis + ')' if axis else ''} known")
        return desc

    if name == "set_target_temp":
        return DataFrame(target(ModuleKind.HOTEND).command_id, bytes([OP_SET_TARGET_TEMP]) + encode_temp(args[0]))
    if name == "set_fan":
        return DataFrame(target(ModuleKind.HOTEND).command_id, bytes([OP_SET_FAN, int(args[0])]))
    if name == "set_filter":
        return DataFrame(target(ModuleKind.SAFETY).command_id, bytes([OP_SET_FILTER, int(args[0])]))
    if name == "kill":
        return DataFrame(target(ModuleKind.SAFETY).command_id, bytes([OP_KILL_SWITCH]))
    if name == "move":
        axis, steps = args
        desc = target(ModuleKind.MOTION_AXIS, axis)
        return DataFrame(desc.command_id, bytes([OP_MOVE, AXES.index(axis)]) + encode_steps(steps))
    if name == "home":
        return DataFrame(target(ModuleKind.MOTION_AXIS, args[0]).command_id, bytes([OP_HOME]))
    if name == "set_zero":
        return DataFrame(target(ModuleKind.MOTION_AXIS, args[0]).command_id, bytes([OP_SET_ZERO]))
    if name == "set_camera":
        return DataFrame(target(ModuleKind.CAMERA).command_id, bytes([OP_SET_CAMERA, int(args[0])]))
    if name == "set_config":
        return DataFrame(target(ModuleKind.CAMERA).command_id, bytes([OP_SET_CONFIG]) + args[1].encode())
    if name == "reflash":
        module, digest = args
        kind, axis = _kind_for_name(module)
        desc = target(kind, axis)
        return DataFrame(service_id, bytes([OP_REFLASH]) + desc.command_id.to_bytes(2, "big") + bytes.fromhex(digest))
    if name == "halt":
        return DataFrame(target(ModuleKind.MAIN_BOARD).command_id, bytes([OP_HALT]))
    raise ValueError(name)


def _kind_for_name(name):
    for kind in ModuleKind:
        for axis in (AXES if kind in _AXIAL else (None,)):
            if module_name(kind, axis) == name:
                return kind, axis
    raise KeyError(f"unknown module {name!r}")


# -- plant constants and state ---------------------------------------------

@dataclass(frozen=True)
class PlantConfig:
    k_heat: float = 4.0  # degC/s at full duty
    k_loss: float = 0.01  # 1/s, fan off
    k_loss_fan: float = 0.03  # 1/s, fan on
    ambient_c: float = 25.0
    kp: float = 0.05
    ki: float = 0.001
    kd: float = 0.0
    safe_min_c: float = 0.0
    safe_max_c: float = 300.0
    plant_dt: float = 0.01  # s
    telemetry_period: float = 0.1  # s, hotend current temperature
    status_period: float = 0.5  # s, other peripherals
    heartbeat_period: float = 1.0  # s, main board status
    registration_window: float = 0.05  # s
    axis_speed: int = 40  # steps per plant tick
    homing_speed: int = 20
    axis_max: int = 20000
    axis_start: tuple = (4000, 3000, 2000)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class HotendState:
    temp_c: float = 25.0
    target_c: float = 0.0
    duty: float = 0.0
    kp: float = 0.05
    ki: float = 0.001
    kd: float = 0.0
    integral: float = 0.0
    fan_on: bool = False
    ambient_c: float = 25.0
    prev_error: float = 0.0

    @classmethod
    def from_config(cls, config):
        return cls(
            temp_c=config.ambient_c, ambient_c=config.ambient_c, kp=config.kp, ki=config.ki, kd=config.kd
        )


def thermal_step(state, dt, config=PlantConfig()):
    """Advance the hotend by ``dt`` seconds; returns a new state.

    PID with conditional integration: the integral only moves while the
    output is unsaturated or the error drives it back out of saturation.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    error = state.target_c - state.temp_c
    derivative = (error - state.prev_error) / dt
    base = state.kp * error + state.kd * derivative
    trial = state.integral + error * dt
    u = base + state.ki * trial
    integral = state.integral
    if 0.0 < u < 1.0 or (u >= 1.0 and error < 0) or (u <= 0.0 and error > 0):
        integral = trial
    if state.ki > 0:
        integral = min(max(integral, 0.0), 1.0 / state.ki)
    duty = min(max(base + state.ki * integral, 0.0), 1.0)
    k_loss = config.k_loss_fan if state.fan_on else config.k_loss
    temp = state.temp_c + dt * (config.k_heat * duty - k_loss * (state.temp_c - state.ambient_c))
    return dataclasses.replace(state, temp_c=temp, duty=duty, integral=integral, prev_error=error)


@dataclass
class MotionState:
    position_steps: int = 0  # physical carriage position
    target_steps: int = 0  # physical target
    zero_offset: int = 0  # physical position the axis believes is 0
    calibrated: bool = False
    homing: bool = False
    limit_min: bool = False
    limit_max: bool = False
    min_coord: int = 0
    max_coord: int = 20000

    @property
    def logical_position(self):
        return self.position_steps - self.zero_offset

    @property
    def calibration_error(self):
        """Distance between the calibrated zero and the true minimum stop."""
        return self.zero_offset - self.min_coord

    def update_limits(self):
        self.limit_min = self.position_steps <= self.min_coord
        self.limit_max = self.position_steps >= self.max_coord


@dataclass
class SafetyState:
    air_filter_on: bool = False
    kill_switch: bool = False


@dataclass
class CameraState:
    recording: bool = True
    config: bytes = b""


@dataclass
class MainBoardState:
    displayed_temp_c: float = None
    fault: bool = False
    fault_reason: str = ""
    registered: dict = field(default_factory=dict)  # status_id -> ModuleDescriptor
    expected_telemetry_period: int = 0  # ticks
    registration_complete: bool = False
    positions: dict = field(default_factory=dict)
    limits: dict = field(default_factory=dict)
    safety: dict = field(default_factory=dict)
    camera_recording: bool = None
    homing: set = field(default_factory=set)
    target_c: float = 0.0
    fan_on: bool = False
    filter_on: bool = False
    diagnostics: list = field(default_factory=list)

    @property
    def registered_count(self):
        return len(self.registered)


def fault_check(board, reported_temp, config=PlantConfig()):
    """Apply a received hotend temperature to the board.

    A faulted board is locked: the display freezes at the value that tripped
    it and later telemetry is ignored until :func:`reset_fault`.
    """
    if board.fault:
        return board
    board.displayed_temp_c = reported_temp
    if not config.safe_min_c <= reported_temp <= config.safe_max_c:
        board.fault = True
        board.fault_reason = f"temperature {reported_temp:g} outside [{config.safe_min_c:g}, {config.safe_max_c:g}]"
    return board


def reset_fault(board):
    board.fault = False
    board.fault_reason = ""
    return board


# -- module runtimes -------------------------------------------------------

class Module:
    """Base runtime: one node, broadcast/service handling, diagnostics."""

    filter = COMMAND_FILTER

    def __init__(self, sim, desc):
        self.sim = sim
        self.desc = desc
        self.node = Node(sim.bus, self.filter, name=desc.name)
        self.firmware_tainted = False
        self.firmware_digest = None
        self.diagnostics = []
        self.commands_applied = 0
        self.received_halt = False

    @property
    def name(self):
        return self.desc.name

    @property
    def bus_off(self):
        return self.node.bus_off

    @property
    def state(self):
        return None

    def send(self, frame):
        try:
            self.node.send(frame)
        except BusOff:
            self.diagnostic("tx_while_bus_off", f"0x{frame.id:03X}")

    def diagnostic(self, kind, detail=""):
        self.diagnostics.append((self.sim.bus.time, kind, detail))

    def receive(self, time, frame):
        topo = self.sim.topology
        if frame.rtr or not frame.payload:
            return
        if frame.id == topo.board.command_id:
            op = frame.payload[0]
            if op == OP_ENUMERATE:
                self.send(DataFrame(self.desc.status_id, bytes([self.desc.kind_code]) + self.desc.command_id.to_bytes(2, "big")))
            elif op == OP_HALT:
                self.received_halt = True
                self.on_halt()
            return
        if frame.id == topo.service_id:
            if frame.payload[0] == OP_REFLASH and len(frame.payload) == 7:
                if int.from_bytes(frame.payload[1:3], "big") == self.desc.command_id:
                    self.firmware_tainted = True
                    self.firmware_digest = frame.payload[3:7].hex()
            return
        if frame.id == self.desc.command_id:
            handle_command(self, frame)

    def apply(self, frame):
        """Apply a command frame; return False for an unknown opcode."""
        return False

    def on_halt(self):
        pass

    def plant_tick(self, dt):
        pass

    def status_frame(self):
        return None

    def emit_status(self):
        frame = self.status_frame()
        if frame is not None and not self.bus_off:
            self.send(frame)

    def snapshot(self):
        data = {
            "bus_off": self.bus_off,
            "firmware_tainted": self.firmware_tainted,
            "firmware_digest": self.firmware_digest,
            "diagnostic_count": len(self.diagnostics),
            "commands_applied": self.commands_applied,
            "received_halt": self.received_halt,
        }
        if self.state is not None:
            for f in dataclasses.fields(self.state):
                value = getattr(self.state, f.name)
                if isinstance(value, (bool, int, float, str)) or value is None:
                    data[f.name] = value
        return data


def handle_command(module, frame):
    """Dispatch a command frame addressed to ``module`` by opcode."""
    if frame.id != module.desc.command_id:
        return
    if not module.apply(frame):
        module.diagnostic("unknown_opcode", f"0x{frame.payload[0]:02X}" if frame.payload else "empty")
        return
    module.commands_applied += 1


class Hotend(Module):
    def __init__(self, sim, desc):
        super().__init__(sim, desc)
        self.hotend = HotendState.from_config(sim.config)

    @property
    def state(self):
        return self.hotend

    def apply(self, frame):
        op, data = frame.payload[0], frame.payload[1:]
        if op == OP_SET_TARGET_TEMP and len(data) == 2:
            self.hotend.target_c = decode_temp(data)
        elif op == OP_SET_FAN and len(data) == 1:
            self.hotend.fan_on = bool(data[0])
        else:
            return False
        return True

    def on_halt(self):
        self.hotend.target_c = 0.0

    def plant_tick(self, dt):
        self.hotend = thermal_step(self.hotend, dt, self.sim.config)

    def status_frame(self):
        return temperature_frame(self.desc.status_id, self.hotend.temp_c)

    def snapshot(self):
        data = super().snapshot()
        data["temp_c"] = self.hotend.temp_c
        return data


class MotionAxis(Module):
    def __init__(self, sim, desc):
        super().__init__(sim, desc)
        cfg = sim.config
        start = cfg.axis_start[AXES.index(desc.axis)]
        self.motion = MotionState(position_steps=start, target_steps=start, max_coord=cfg.axis_max)
        self.motion.update_limits()

    @property
    def state(self):
        return self.motion

    def apply(self, frame):
        op, data = frame.payload[0], frame.payload[1:]
        m = self.motion
        if op == OP_MOVE and len(data) == 5:
            if data[0] != AXES.index(self.desc.axis):
                return False
            m.homing = False
            m.target_steps = decode_steps(data[1:]) + m.zero_offset
        elif op == OP_HOME and not data:
            m.homing = True
            m.calibrated = False
        elif op == OP_SET_ZERO and not data:
            m.homing = False
            m.zero_offset = m.position_steps
            m.target_steps = m.position_steps
            m.calibrated = True
        else:
            return False
        return True

    def on_halt(self):
        self.motion.homing = False
        self.motion.target_steps = self.motion.position_steps

    def plant_tick(self, dt):
        m = self.motion
        cfg = self.sim.config
        if m.homing:
            m.position_steps = max(m.min_coord, m.position_steps - cfg.homing_speed)
            m.target_steps = m.position_steps
        else:
            delta = max(-cfg.axis_speed, min(cfg.axis_speed, m.target_steps - m.position_steps))
            m.position_steps = max(m.min_coord, min(m.max_coord, m.position_steps + delta))
        m.update_limits()

    def status_frame(self):
        return DataFrame(self.desc.status_id, bytes([ST_AXIS]) + encode_steps(self.motion.logical_position))

    def snapshot(self):
        data = super().snapshot()
        data["logical_position"] = self.motion.logical_position
        data["calibration_error"] = self.motion.calibration_error
        return data


class LimitSwitch(Module):
    """Endstop sensing its axis carriage; reports edges immediately."""

    def __init__(self, sim, desc):
        super().__init__(sim, desc)
        self.limit_min = False
        self.limit_max = False

    def _axis(self):
        return self.sim.modules.get(module_name(ModuleKind.MOTION_AXIS, self.desc.axis))

    def plant_tick(self, dt):
        axis = self._axis()
        if axis is None:
            return
        now = (axis.motion.limit_min, axis.motion.limit_max)
        if now != (self.limit_min, self.limit_max):
            self.limit_min, self.limit_max = now
            self.emit_status()

    def status_frame(self):
        return DataFrame(self.desc.status_id, bytes([ST_LIMIT, int(self.limit_min), int(self.limit_max)]))

    def snapshot(self):
        data = super().snapshot()
        data.update(limit_min=self.limit_min, limit_max=self.limit_max)
        return data


class SafetyModule(Module):
    def __init__(self, sim, desc):
        super().__init__(sim, desc)
        self.safety = SafetyState()

    @property
    def state(self):
        return self.safety

    def apply(self, frame):
        op, data = frame.payload[0], frame.payload[1:]
        if op == OP_SET_FILTER and len(data) == 1:
            self.safety.air_filter_on = bool(data[0])
        elif op == OP_KILL_SWITCH and not data:
            if not self.safety.kill_switch:
                self.safety.kill_switch = True
                self.emit_status()
        else:
            return False
        return True

    def status_frame(self):
        s = self.safety
        return DataFrame(self.desc.status_id, bytes([ST_SAFETY, int(s.air_filter_on), int(s.kill_switch)]))


class CameraMonitor(Module):
    def __init__(self, sim, desc):
        super().__init__(sim, desc)
        self.camera = CameraState()

    @property
    def state(self):
        return self.camera

    def apply(self, frame):
        op, data = frame.payload[0], frame.payload[1:]
        if op == OP_SET_CAMERA and len(data) == 1:
            self.camera.recording = bool(data[0])
        elif op == OP_SET_CONFIG:
            self.camera.config = bytes(data)
        else:
            return False
        return True

    def status_frame(self):
        return DataFrame(self.desc.status_id, bytes([ST_CAMERA, int(self.camera.recording)]))

    def snapshot(self):
        data = super().snapshot()
        data["config"] = self.camera.config.decode("ascii", "replace")
        return data


class MainBoard(Module):
    filter = STATUS_FILTER

    def __init__(self, sim, desc):
        super().__init__(sim, desc)
        self.board = MainBoardState(expected_telemetry_period=sim.ticks(sim.config.telemetry_period))
        self.last_status = {}

    @property
    def state(self):
        return self.board

    def enumerate(self):
        self.board.registered.clear()
        self.board.registration_complete = False
        self.send(DataFrame(self.desc.command_id, bytes([OP_ENUMERATE])))

    def close_registration(self):
        self.board.registration_complete = True
        expected = {m.status_id: m for m in self.sim.topology.peripherals}
        return [m.name for sid, m in expected.items() if sid not in self.board.registered]

    def command(self, command):
        """Issue an operator command over the bus (no-op once faulted)."""
        if self.board.fault:
            self.diagnostic("command_refused_faulted", str(command))
            return
        if isinstance(command, str):
            command = parse_command(command)
        topo = self.sim.topology
        frame = command_frame(command, topo.find, topo.service_id)
        b = self.board
        if command.name == "set_target_temp":
            b.target_c = command.args[0]
        elif command.name == "set_fan":
            b.fan_on = command.args[0]
        elif command.name == "set_filter":
            b.filter_on = command.args[0]
        elif command.name == "home":
            b.homing.add(command.args[0])
        self.send(frame)

    def receive(self, time, frame):
        if frame.rtr or not frame.payload:
            return
        self.last_status[frame.id] = time
        b = self.board
        op = frame.payload[0]
        if op < ST_BOARD and len(frame.payload) == 3:
            self._registration_response(frame)
            return
        if op == ST_HOTEND and len(frame.payload) == 3:
            was = b.fault
            fault_check(b, decode_temp(frame.payload[1:]), self.sim.config)
            if b.fault and not was:
                self._trip()
        elif op == ST_AXIS and len(frame.payload) == 5:
            b.positions[frame.id] = decode_steps(frame.payload[1:])
        elif op == ST_LIMIT and len(frame.payload) == 3:
            limit_min = bool(frame.payload[1])
            b.limits[frame.id] = (limit_min, bool(frame.payload[2]))
            self._homing_feedback(frame.id, limit_min)
        elif op == ST_SAFETY and len(frame.payload) == 3:
            b.safety[frame.id] = (bool(frame.payload[1]), bool(frame.payload[2]))
            if frame.payload[2] and not b.fault:
                b.fault = True
                b.fault_reason = "kill switch engaged"
                self._trip()
        elif op == ST_CAMERA and len(frame.payload) == 2:
            b.camera_recording = bool(frame.payload[1])

    def _registration_response(self, frame):
        b = self.board
        decoded = kind_from_code(frame.payload[0])
        if decoded is None:
            self.diagnostic("bad_registration", f"0x{frame.id:03X}")
            return
        if frame.id in b.registered or b.registration_complete:
            self.diagnostic("duplicate_registration", f"0x{frame.id:03X}")
            return
        kind, axis = decoded
        b.registered[frame.id] = ModuleDescriptor(kind, int.from_bytes(frame.payload[1:3], "big"), frame.id, axis)

    def _homing_feedback(self, status_id, limit_min):
        if not limit_min:
            return
        for axis in sorted(self.board.homing):
            switch = self.sim.topology.find(ModuleKind.LIMIT_SWITCH, axis)
            if switch is not None and switch.status_id == status_id:
                self.board.homing.discard(axis)
                self.send(command_frame(Command("set_zero", (axis,)), self.sim.topology.find))

    def _trip(self):
        # fault status first, then the halt broadcast
        self.send(self.status_frame(force=True))
        self.send(DataFrame(self.desc.command_id, bytes([OP_HALT])))

    def status_frame(self, force=False):
        if self.board.fault and not force:
            return None
        return DataFrame(self.desc.status_id, bytes([ST_BOARD, int(self.board.fault), self.board.registered_count]))

    def telemetry_stale(self, status_id, now=None):
        now = self.sim.bus.time if now is None else now
        last = self.last_status.get(status_id)
        return last is None or now - last > 3 * self.board.expected_telemetry_period

    def snapshot(self):
        b = self.board
        data = {
            "bus_off": self.bus_off,
            "displayed_temp": b.displayed_temp_c,
            "fault": b.fault,
            "fault_reason": b.fault_reason,
            "registered_count": b.registered_count,
            "registration_complete": b.registration_complete,
            "target_c": b.target_c,
            "camera_recording": b.camera_recording,
            "diagnostic_count": len(self.diagnostics),
            "diagnostics": [list(d) for d in self.diagnostics],
        }
        for desc in self.sim.topology.peripherals:
            if desc.kind is ModuleKind.MOTION_AXIS:
                data[f"position_{desc.axis}"] = b.positions.get(desc.status_id)
            elif desc.kind is ModuleKind.SAFETY:
                reported = b.safety.get(desc.status_id)
                data["filter_reported"] = None if reported is None else reported[0]
        return data


MODULE_TYPES = {
    ModuleKind.MAIN_BOARD: MainBoard,
    ModuleKind.HOTEND: Hotend,
    ModuleKind.MOTION_AXIS: MotionAxis,
    ModuleKind.LIMIT_SWITCH: LimitSwitch,
    ModuleKind.SAFETY: SafetyModule,
    ModuleKind.CAMERA: CameraMonitor,
}
