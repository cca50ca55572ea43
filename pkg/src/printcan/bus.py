"""Deterministic shared CAN medium.

One :meth:`VirtualBus.step` resolves one frame slot. Arbitration compares
the 12-bit arbitration field (identifier + RTR) of every pending head frame
bit by bit under wired-AND semantics. The winner's data bits are not
simulated individually; the codec supplies slot lengths.

Fault confinement is simplified: +8 transmit errors per destroyed frame,
-1 per success, bus-off at 256 with no recovery. An error-passive
transmitter is not charged for a missing ACK.
"""
from dataclasses import dataclass
from enum import Enum

from .errors import BusError, BusOff
from .frame import (
    ERROR_DELIMITER_BITS,
    ERROR_FLAG_BITS,
    INTERFRAME_BITS,
    TAIL_BITS,
    arbitration_bits,
    check_id,
    frame_length,
    header_length,
)
from .node import DEFAULT_RX_CAPACITY, ERROR_PASSIVE, PROMISCUOUS, Controller, Mailbox

ERROR_FRAME_BITS = ERROR_FLAG_BITS + ERROR_DELIMITER_BITS


class EventKind(str, Enum):
    ARBITRATION_WON = "ArbitrationWon"
    FRAME_DELIVERED = "FrameDelivered"
    FRAME_DESTROYED = "FrameDestroyed"
    ERROR_FRAME = "ErrorFrame"
    BUS_IDLE = "BusIdle"
    PROTOCOL_VIOLATION = "ProtocolViolation"
    BUS_OFF = "BusOff"


@dataclass(frozen=True)
class BusEvent:
    time: int
    kind: EventKind
    frame: object = None
    source: int = None
    losers: tuple = ()

    def render(self):
        frame = "-" if self.frame is None else f"{self.frame.id:03X}#{'R' if self.frame.rtr else self.frame.payload.hex().upper()}"
        source = "-" if self.source is None else str(self.source)
        losers = ",".join(f"{i:03X}" for i in self.losers)
        return f"{self.time} {self.kind.value} {frame} {source} {losers}"


@dataclass
class InjectionRule:
    injector: int
    target_id: int
    until: int = None  # tick; rule inactive for slots starting at or after it
    shots: int = 1  # None = unlimited
    fired: int = 0

    def live(self, now):
        if self.until is not None and now >= self.until:
            return False
        return self.shots is None or self.fired < self.shots


class VirtualBus:
    def __init__(self, bitrate=500_000, record=True):
        self.bitrate = bitrate
        self.time = 0
        self.finalized = False
        self.record = record
        self.history = []
        self._nodes = []
        self._rules = []

    # -- topology ---------------------------------------------------------
    def attach(self, filter=PROMISCUOUS, capacity=DEFAULT_RX_CAPACITY, name="", listener=None):
        if self.finalized:
            raise BusError("cannot attach to a finalized simulation")
        index = len(self._nodes)
        self._nodes.append(
            Controller(index, filter, Mailbox(capacity), name=name or f"node{index}", listener=listener)
        )
        return index

    def finalize(self):
        self.finalized = True

    def controller(self, handle):
        try:
            return self._nodes[handle]
        except (IndexError, TypeError):
            raise BusError(f"unknown node handle {handle!r}") from None

    @property
    def controllers(self):
        return tuple(self._nodes)

    # -- transmission -----------------------------------------------------
    def queue_tx(self, handle, frame):
        ctrl = self.controller(handle)
        if ctrl.bus_off:
            raise BusOff(f"{ctrl.name} is bus-off")
        ctrl.tx.append(frame)

    def inject_error(self, handle, target_id, until=None, shots=1):
        """Arm an error flag against the next transmission(s) of ``target_id``.

        The injector never destroys frames it transmits itself.
        """
        self.controller(handle)
        check_id(target_id)
        rule = InjectionRule(handle, target_id, until=until, shots=shots)
        self._rules.append(rule)
        return rule

    def disarm(self, rule):
        if rule in self._rules:
            self._rules.remove(rule)

    def pending(self):
        """Head-of-queue frames of every node allowed to transmit."""
        return [(c.index, c.tx[0]) for c in self._nodes if c.tx and not c.bus_off]

    def seconds(self, ticks=None):
        return (self.time if ticks is None else ticks) / self.bitrate

    # -- the slot ---------------------------------------------------------
    def step(self, idle_until=None):
        contenders = self.pending()
        start = self.time
        if not contenders:
            events = [BusEvent(start, EventKind.BUS_IDLE)]
            self.time = idle_until if idle_until is not None and idle_until > start else start + 1
            return self._log(events)

        winners = self._arbitrate(contenders)
        win_frame = winners[0][1]
        losers = tuple(f.id for h, f in contenders if all(h != w for w, _ in winners))
        events = [BusEvent(start, EventKind.ARBITRATION_WON, win_frame, winners[0][0], losers)]

        distinct = {f for _, f in winners}
        if len(distinct) > 1:
            end = start + header_length(win_frame) + ERROR_FRAME_BITS
            events.append(BusEvent(end, EventKind.PROTOCOL_VIOLATION, win_frame, winners[0][0]))
            self._destroy(winners, None, end, events)
            self.time = end + INTERFRAME_BITS
            return self._log(events)

        tx_handles = {h for h, _ in winners}
        rule = self._matching_rule(win_frame.id, tx_handles, start)
        if rule is not None:
            rule.fired += 1
            end = start + header_length(win_frame) + ERROR_FRAME_BITS
            events.append(BusEvent(end, EventKind.ERROR_FRAME, win_frame, rule.injector))
            self._destroy(winners, rule.injector, end, events)
            self.time = end + INTERFRAME_BITS
            return self._log(events)

        receivers = [c for c in self._nodes if c.index not in tx_handles and not c.bus_off]
        length = frame_length(win_frame)
        if not receivers:
            # nobody drives the ACK slot dominant
            end = start + length - (TAIL_BITS - 2) + ERROR_FRAME_BITS
            events.append(BusEvent(end, EventKind.ERROR_FRAME, win_frame, winners[0][0]))
            self._destroy(winners, None, end, events, ack_error=True)
            self.time = end + INTERFRAME_BITS
            return self._log(events)

        end = start + length
        for h, _ in winners:
            ctrl = self._nodes[h]
            ctrl.tx.popleft()
            ctrl.counters.transmit_ok()
            ctrl.sent += 1
        events.append(BusEvent(end, EventKind.FRAME_DELIVERED, win_frame, winners[0][0]))
        for ctrl in receivers:
            ctrl.counters.receive_ok()
            if ctrl.accepts(win_frame.id):
                ctrl.mailbox.push(end, win_frame)
                if ctrl.listener is not None:
                    ctrl.listener(end, win_frame)
        self.time = end + INTERFRAME_BITS
        return self._log(events)

    def run(self, steps):
        out = []
        for _ in range(steps):
            out.extend(self.step())
        return out

    # -- internals --------------------------------------------------------
    def _arbitrate(self, contenders):
        alive = [(h, f, arbitration_bits(f)) for h, f in contenders]
        for pos in range(12):
            level = min(bits[pos] for _, _, bits in alive)
            alive = [c for c in alive if c[2][pos] == level]
        return [(h, f) for h, f, _ in alive]

    def _matching_rule(self, ident, tx_handles, now):
        for rule in self._rules:
            if rule.target_id != ident or rule.injector in tx_handles:
                continue
            if self._nodes[rule.injector].bus_off or not rule.live(now):
                continue
            return rule
        return None

    def _destroy(self, winners, injector, end, events, ack_error=False):
        tx_handles = {h for h, _ in winners}
        for h, frame in winners:
            ctrl = self._nodes[h]
            events.append(BusEvent(end, EventKind.FRAME_DESTROYED, frame, h))
            if not (ack_error and ctrl.counters.state == ERROR_PASSIVE):
                ctrl.counters.transmit_failed()
            if ctrl.bus_off:
                ctrl.tx.clear()
                events.append(BusEvent(end, EventKind.BUS_OFF, None, h))
        for ctrl in self._nodes:
            if ctrl.index not in tx_handles and ctrl.index != injector and not ctrl.bus_off:
                ctrl.counters.receive_failed()
        self._rules = [r for r in self._rules if r.shots is None or r.fired < r.shots]

    def _log(self, events):
        if self.record:
            self.history.extend(events)
        return events
