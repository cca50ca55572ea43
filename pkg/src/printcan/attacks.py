"""The compromised node: capture, ID-map inference, and attack primitives.

An :class:`Attacker` is one promiscuous node on the bus with no credentials.
It captures every delivered frame from the moment it attaches; primitives
schedule transmissions or error injections on the owning simulation.
"""
import statistics
from dataclasses import dataclass, field

from .bus import EventKind
from .errors import IncompleteCapture
from .frame import DataFrame, check_id
from .node import PROMISCUOUS, Node
from .plant import (
    OP_ENUMERATE,
    IdRole,
    ModuleDescriptor,
    ModuleKind,
    command_frame,
    kind_from_code,
    parse_command,
    temperature_frame,
)

REGISTRATION_CONFIDENCE = 1.0
PERIODIC_CONFIDENCE = 0.5
PERIODIC_MIN_OBSERVATIONS = 3
PERIODIC_JITTER = 0.10
SPOOF_RATE_MULTIPLIER = 5


class TrafficLog:
    """Ordered ``(time, frame)`` capture; times in bus ticks."""

    def __init__(self, entries=()):
        self.entries = list(entries)

    def append(self, time, frame):
        self.entries.append((time, frame))

    def window(self, start=None, end=None):
        return TrafficLog(
            (t, f) for t, f in self.entries
            if (start is None or t >= start) and (end is None or t <= end)
        )

    def frames(self):
        return [f for _, f in self.entries]

    def count(self, ident):
        return sum(1 for _, f in self.entries if f.id == ident)

    def ids(self):
        return sorted({f.id for _, f in self.entries})

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other):
        return isinstance(other, TrafficLog) and self.entries == other.entries


class IdMap(dict):
    """FrameId -> :class:`~printcan.plant.IdRole` (role + confidence)."""

    def find(self, kind, axis=None):
        """Reconstruct a target descriptor from inferred command/status IDs."""
        command = status = None
        for ident, role in self.items():
            if role.kind is kind and role.axis == axis:
                if role.direction == "command":
                    command = ident
                elif role.direction == "status":
                    status = ident
        if command is None:
            return None
        return ModuleDescriptor(kind, command, command if status is None else status, axis)

    def status_id(self, kind, axis=None):
        for ident, role in self.items():
            if role.kind is kind and role.axis == axis and role.direction == "status":
                return ident
        return None

    def confident(self, threshold=REGISTRATION_CONFIDENCE):
        return {i: r for i, r in self.items() if r.confidence >= threshold}


def infer_id_map(log):
    """Infer identifier roles from a capture spanning registration.

    The first single-byte enumerate request names the board's command ID;
    subsequent three-byte frames whose first byte is a module kind code are
    registration responses ``[kind, command_hi, command_lo]`` sent on the
    module's status ID. IDs seen at least three times at even spacing are
    then tagged as telemetry with lower confidence.
    """
    entries = list(log)
    request = next(
        (i for i, (_, f) in enumerate(entries) if not f.rtr and f.payload == bytes([OP_ENUMERATE])), None
    )
    if request is None:
        raise IncompleteCapture("capture holds no enumeration request")
    board_id = entries[request][1].id
    idmap = IdMap()
    idmap[board_id] = IdRole(ModuleKind.MAIN_BOARD, "command", None, REGISTRATION_CONFIDENCE)
    for _, frame in entries[request + 1:]:
        if frame.rtr or frame.dlc != 3 or frame.id == board_id or frame.id in idmap:
            continue
        decoded = kind_from_code(frame.payload[0])
        if decoded is None or decoded[0] is ModuleKind.MAIN_BOARD:
            continue
        command_id = int.from_bytes(frame.payload[1:3], "big")
        if command_id > 0x7FF or command_id in idmap:
            continue
        kind, axis = decoded
        idmap[frame.id] = IdRole(kind, "status", axis, REGISTRATION_CONFIDENCE)
        idmap[command_id] = IdRole(kind, "command", axis, REGISTRATION_CONFIDENCE)

    times = {}
    for t, frame in entries:
        if frame.id not in idmap:
            times.setdefault(frame.id, []).append(t)
    for ident in sorted(times):
        if is_periodic(times[ident]):
            idmap[ident] = IdRole(None, "telemetry", None, PERIODIC_CONFIDENCE)
    return idmap


def is_periodic(times, jitter=PERIODIC_JITTER):
    if len(times) < PERIODIC_MIN_OBSERVATIONS:
        return False
    gaps = [b - a for a, b in zip(times, times[1:])]
    period = statistics.median(gaps)
    if period <= 0:
        return False
    return all(abs(g - period) <= jitter * period for g in gaps)


def estimate_period(log, ident):
    """Median inter-arrival time of ``ident`` in ticks, or None."""
    times = [t for t, f in log if f.id == ident]
    if len(times) < 2:
        return None
    return statistics.median(b - a for a, b in zip(times, times[1:]))


@dataclass
class PrimitiveRecord:
    """One executed primitive, as reported in the impact report."""

    name: str
    start: int
    end: int
    ids: list = field(default_factory=list)  # identifiers the primitive targets
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AttackStep:
    start: float  # seconds
    primitive: str
    params: dict = field(default_factory=dict, hash=False, compare=True)


@dataclass
class AttackScript:
    steps: list = field(default_factory=list)

    def __post_init__(self):
        starts = [s.start for s in self.steps]
        if starts != sorted(starts):
            raise ValueError("attack step start times must be nondecreasing")


class Attacker:
    """A single malicious node: one attachment, promiscuous filter."""

    def __init__(self, sim, name="attacker"):
        self.sim = sim
        self.node = Node(sim.bus, PROMISCUOUS, name=name)
        self.log = TrafficLog()
        self.transmitted = 0
        self.records = []
        self.faults = []
        self._floods = []
        sim.add_participant(self)
        sim.pre_step.append(self._flood_hook)

    @property
    def handle(self):
        return self.node.handle

    def receive(self, time, frame):
        self.log.append(time, frame)

    def _t(self, seconds):
        return self.sim.ticks(seconds)

    def _send(self, frame):
        if self.node.bus_off:
            return
        self.node.send(frame)
        self.transmitted += 1

    def _record(self, name, start, end, ids, **params):
        rec = PrimitiveRecord(name, start, end, sorted(set(ids)), params)
        self.records.append(rec)
        return rec

    def _periodic(self, start, end, interval, make_frame):
        """Queue ``make_frame()`` every ``interval`` ticks in [start, end)."""
        if interval is None:
            self.sim.at(start, lambda: self._send(make_frame()))
        else:
            self.sim.every(interval, lambda: self._send(make_frame()), start=start, until=end)

    def idmap(self):
        return infer_id_map(self.log)

    # -- primitives -------------------------------------------------------
    def eavesdrop(self, start=0.0, end=None):
        """Captured frames in ``[start, end]`` seconds; transmits nothing."""
        t0 = self._t(start)
        t1 = None if end is None else self._t(end)
        self._record("eavesdrop", t0, t1, [])
        return self.log.window(t0, t1)

    def spoof(self, ident, payload, start, end=None, rate=None, name="spoof"):
        """Send ``payload`` on ``ident`` at ``rate`` frames/s (once if None)."""
        check_id(ident)
        frame = DataFrame(ident, payload)
        t0 = self._t(start)
        t1 = None if end is None else self._t(end)
        interval = None if rate is None else max(1, round(self.sim.bitrate / rate))
        self._periodic(t0, t1, interval, lambda: frame)
        self._record(name, t0, t1, [ident], payload=frame.payload.hex(), rate=rate)

    def flood_dos(self, start, end, ident=0x000, payload=bytes(8)):
        """Keep one frame at ``ident`` pending every slot in [start, end)."""
        frame = DataFrame(ident, payload)
        t0, t1 = self._t(start), self._t(end)
        self._floods.append((t0, t1, frame))
        self._record("flood_dos", t0, t1, [ident])

    def _flood_hook(self):
        now = self.sim.bus.time
        for t0, t1, frame in self._floods:
            if t0 <= now < t1 and self.node.pending_tx() == 0 and not self.node.bus_off:
                self._send(frame)
                return

    def targeted_block(self, ids, start, end, name="targeted_block"):
        """Error-inject every transmission of ``ids`` in [start, end)."""
        t0, t1 = self._t(start), self._t(end)
        ids = sorted(set(ids))

        def arm():
            for ident in ids:
                self.sim.bus.inject_error(self.handle, ident, until=t1, shots=None)

        self.sim.at(t0, arm)
        self._record(name, t0, t1, ids)

    def replay(self, ids, start, end=None, source_start=0.0, source_end=None):
        """Re-send captured frames of ``ids`` from the source window.

        Relative timing is scaled into [start, end]; with no end the original
        spacing is kept.
        """
        t0 = self._t(start)
        t1 = None if end is None else self._t(end)
        s0 = self._t(source_start)
        s1 = None if source_end is None else self._t(source_end)
        ids = set(ids)
        rec = self._record("replay", t0, t1, sorted(ids))

        def launch():
            picked = [(t, f) for t, f in self.log.window(s0, s1) if f.id in ids]
            rec.params["frames"] = len(picked)
            if not picked:
                return
            first, last = picked[0][0], picked[-1][0]
            span = last - first
            scale = 1.0 if t1 is None or span == 0 else (t1 - t0) / span
            for t, frame in picked:
                due = t0 + round((t - first) * scale)
                self.sim.at(due, lambda f=frame: self._send(f))

        self.sim.at(t0, launch)

    def fuzz(self, ident, start, end, rate):
        """Random-payload frames on ``ident`` drawn from the simulation RNG."""
        rng = self.sim.rng
        t0, t1 = self._t(start), self._t(end)

        def make():
            n = rng.randint(1, 8)
            return DataFrame(ident, bytes(rng.getrandbits(8) for _ in range(n)))

        self._periodic(t0, t1, max(1, round(self.sim.bitrate / rate)), make)
        self._record("fuzz", t0, t1, [ident], rate=rate)

    def inject(self, command, start, idmap=None):
        """Spoof one printer command, addressed via the inferred ID map."""
        command = parse_command(command) if isinstance(command, str) else command

        def fire():
            try:
                frame = command_frame(command, (idmap or self.idmap()).find, self.sim.topology.service_id)
            except (IncompleteCapture, KeyError) as exc:
                self.faults.append(f"inject {command}: {exc}")
                return
            rec.ids = [frame.id]
            self._send(frame)

        t0 = self._t(start)
        rec = self._record("inject", t0, t0, [], command=str(command))
        self.sim.at(t0, fire)

    # -- composites -------------------------------------------------------
    def scenario1_block_and_spoof(self, commands, start, end, idmap=None):
        """Block the board's commands to the targets and spoof our own.

        The board's broadcast ID and the command ID of every targeted module
        are error-injected for the window; the attacker's frames are exempt.
        """
        commands = [parse_command(c) if isinstance(c, str) else c for c in commands]
        t0, t1 = self._t(start), self._t(end)
        rec_block = self._record("scenario1_block_and_spoof/targeted_block", t0, t1, [])
        rec_spoof = self._record("scenario1_block_and_spoof/spoof", t0, t1, [])

        def fire():
            try:
                m = idmap or self.idmap()
                frames = [command_frame(c, m.find, self.sim.topology.service_id) for c in commands]
                board = m.find(ModuleKind.MAIN_BOARD)
            except (IncompleteCapture, KeyError) as exc:
                self.faults.append(f"scenario1_block_and_spoof: {exc}")
                return
            block = {board.command_id} if board is not None else set()
            block |= {f.id for f in frames if f.id != self.sim.topology.service_id}
            rec_block.ids = sorted(block)
            rec_spoof.ids = sorted({f.id for f in frames})
            for ident in sorted(block):
                self.sim.bus.inject_error(self.handle, ident, until=t1, shots=None)
            for frame in frames:
                self._send(frame)

        self.sim.at(t0, fire)

    def scenario2_sensor_spoof(self, fake_temp, start, end, idmap=None,
                               rate_multiplier=SPOOF_RATE_MULTIPLIER, hide=False):
        """Out-rate the hotend's telemetry with ``fake_temp`` readings.

        Spoofs go out at ``rate_multiplier`` times the observed telemetry rate,
        phased half an interval after the genuine frames so the two never
        contend in the same slot. With ``hide`` the genuine status frames are
        also error-injected.
        """
        t0, t1 = self._t(start), self._t(end)
        rec = self._record("scenario2_sensor_spoof/spoof", t0, t1, [], fake_temp=fake_temp)
        rec_block = self._record("scenario2_sensor_spoof/targeted_block", t0, t1, []) if hide else None

        def fire():
            try:
                m = idmap or self.idmap()
            except IncompleteCapture as exc:
                self.faults.append(f"scenario2_sensor_spoof: {exc}")
                return
            status = m.status_id(ModuleKind.HOTEND)
            if status is None:
                self.faults.append("scenario2_sensor_spoof: hotend status ID unknown")
                return
            rec.ids = [status]
            period = estimate_period(self.log, status) or self.sim.ticks(self.sim.config.telemetry_period)
            interval = max(1, round(period / rate_multiplier))
            last = next((t for t, f in reversed(self.log.entries) if f.id == status), None)
            first = t0
            if last is not None:
                phase = (last + interval // 2) % interval
                first = t0 + (phase - t0) % interval
            frame = temperature_frame(status, fake_temp)
            if hide:
                rec_block.ids = [status]
                self.sim.bus.inject_error(self.handle, status, until=t1, shots=None)
            self.sim.every(interval, lambda: self._send(frame), start=first, until=t1)

        self.sim.at(t0, fire)

    # -- reporting --------------------------------------------------------
    def evidence(self, record):
        """Per-ID evidence counts for one primitive record."""
        bus = self.sim.bus
        t0 = record.start
        t1 = record.end if record.end is not None else bus.time + 1
        inside = [ev for ev in bus.history if t0 <= ev.time <= t1]
        counts = {}
        name = record.name.rsplit("/", 1)[-1]
        if name == "eavesdrop":
            for _, f in self.log.window(t0, t1):
                counts[f.id] = counts.get(f.id, 0) + 1
        elif name == "targeted_block":
            for ev in inside:
                if ev.kind is EventKind.ERROR_FRAME and ev.source == self.handle:
                    counts[ev.frame.id] = counts.get(ev.frame.id, 0) + 1
            for ident in record.ids:
                counts.setdefault(ident, 0)
        elif name == "flood_dos":
            for ev in inside:
                if ev.kind is EventKind.ARBITRATION_WON and ev.source == self.handle:
                    for ident in ev.losers:
                        counts[ident] = counts.get(ident, 0) + 1
            counts.setdefault(record.ids[0], sum(
                1 for ev in inside
                if ev.kind is EventKind.FRAME_DELIVERED and ev.source == self.handle
            ))
        else:
            for ev in inside:
                if ev.kind is EventKind.FRAME_DELIVERED and ev.source == self.handle and ev.frame.id in record.ids:
                    counts[ev.frame.id] = counts.get(ev.frame.id, 0) + 1
            for ident in record.ids:
                counts.setdefault(ident, 0)
        return dict(sorted(counts.items()))
