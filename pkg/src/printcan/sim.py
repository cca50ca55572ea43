"""Timer-driven scheduler around one :class:`~printcan.bus.VirtualBus`.

Time is counted in bit ticks at the nominal bitrate. Timers fire at the
first slot boundary at or after their due tick, ordered by (tick, creation
order); periodic timers are rescheduled from their due tick so they never
drift.
"""
import heapq
import itertools
import random

from .bus import EventKind, VirtualBus
from .errors import RegistrationTimeout
from .plant import MODULE_TYPES, ModuleKind, PlantConfig, default_topology


class Simulation:
    def __init__(self, topology=None, bitrate=500_000, config=None, seed=0):
        self.topology = topology or default_topology()
        self.config = config or PlantConfig()
        self.bitrate = bitrate
        self.bus = VirtualBus(bitrate)
        self.rng = random.Random(seed)
        self._timers = []
        self._seq = itertools.count()
        self.participants = []
        self.modules = {}
        self.pre_step = []
        self.observers = []
        self.registration_error = None
        self.registration_end = None
        self.booted = False
        for desc in self.topology.modules:
            module = MODULE_TYPES[desc.kind](self, desc)
            self.modules[desc.name] = module
            self.participants.append(module)

    @property
    def board(self):
        return self.modules["board"]

    @property
    def now(self):
        return self.bus.time

    def ticks(self, seconds):
        return round(seconds * self.bitrate)

    def seconds(self, ticks):
        return ticks / self.bitrate

    def add_participant(self, participant):
        """Register an extra bus participant (e.g. an attacker) for rx dispatch."""
        self.participants.append(participant)

    # -- timers -----------------------------------------------------------
    def at(self, tick, fn):
        heapq.heappush(self._timers, (tick, next(self._seq), fn))

    def every(self, period, fn, start=0, until=None):
        """Call ``fn()`` at ``start``, ``start + period``, ... (ticks)."""
        if period <= 0:
            raise ValueError("period must be positive")

        def fire(due):
            if until is not None and due >= until:
                return
            fn()
            self.at(due + period, lambda: fire(due + period))

        self.at(start, lambda: fire(start))

    def _fire_due(self):
        while self._timers and self._timers[0][0] <= self.bus.time:
            _, _, fn = heapq.heappop(self._timers)
            fn()

    # -- boot -------------------------------------------------------------
    def boot(self):
        """Schedule enumeration, plant physics and periodic status traffic."""
        if self.booted:
            return
        self.booted = True
        self.bus.finalize()
        cfg = self.config
        window = self.ticks(cfg.registration_window)
        self.registration_end = window
        self.at(0, self.board.enumerate)
        self.at(window, self._close_registration)
        dt_ticks = self.ticks(cfg.plant_dt)
        self.every(dt_ticks, self._plant_tick, start=dt_ticks)
        for module in self.modules.values():
            if module is self.board:
                period = cfg.heartbeat_period
            elif module.desc.kind is ModuleKind.HOTEND:
                period = cfg.telemetry_period
            else:
                period = cfg.status_period
            self.every(self.ticks(period), module.emit_status, start=window)

    def _close_registration(self):
        missing = self.board.close_registration()
        if missing:
            self.registration_error = RegistrationTimeout(missing)

    def _plant_tick(self):
        dt = self.config.plant_dt
        for module in self.modules.values():
            module.plant_tick(dt)

    # -- main loop --------------------------------------------------------
    def step(self, limit=None):
        """Run one bus slot (or idle gap up to ``limit``) and dispatch it."""
        for hook in self.pre_step:
            hook()
        if limit is None and self._timers:
            limit = self._timers[0][0]
        events = self.bus.step(idle_until=limit)
        for ev in events:
            if ev.kind is EventKind.FRAME_DELIVERED:
                for p in self.participants:
                    mailbox = p.node.controller.mailbox
                    while mailbox.rx:
                        time, frame = mailbox.pop()
                        p.receive(time, frame)
        for obs in self.observers:
            obs(events)
        return events

    def run_until(self, end):
        """Advance until simulated time reaches ``end`` ticks."""
        if not self.booted:
            self.boot()
        while True:
            self._fire_due()
            if self.bus.time >= end:
                return
            nxt = self._timers[0][0] if self._timers else end
            self.step(min(nxt, end))

    def run_for(self, seconds):
        self.run_until(self.bus.time + self.ticks(seconds))

    def run_registration(self):
        """Boot and run through the enumeration window.

        Returns the frames seen on the wire during the window; raises
        :class:`RegistrationTimeout` when a configured module never answered.
        """
        start = len(self.bus.history)
        self.boot()
        self.run_until(self.registration_end)
        transcript = wire_transcript(self.bus.history[start:])
        if self.registration_error is not None:
            raise self.registration_error
        return transcript

    def delivered(self):
        return [(ev.time, ev.frame) for ev in self.bus.history if ev.kind is EventKind.FRAME_DELIVERED]


def wire_transcript(events):
    """Frames that were sent to completion, in bus order.

    Delivered frames count, and so do frames that reached the ACK slot with
    nobody to acknowledge them (a node alone on the bus); back-to-back
    retransmissions of one unacknowledged frame appear once.
    """
    out = []
    winner = None
    last_unacked = None
    for ev in events:
        if ev.kind is EventKind.ARBITRATION_WON:
            winner = ev.source
        elif ev.kind is EventKind.FRAME_DELIVERED:
            out.append(ev.frame)
            last_unacked = None
        elif ev.kind is EventKind.ERROR_FRAME and ev.source == winner:
            if last_unacked != (winner, ev.frame):
                out.append(ev.frame)
                last_unacked = (winner, ev.frame)
    return out


def run_registration(topology=None, **kwargs):
    """Fresh simulation + enumeration; returns ``(sim, transcript)``."""
    sim = Simulation(topology, **kwargs)
    transcript = sim.run_registration()
    return sim, transcript
