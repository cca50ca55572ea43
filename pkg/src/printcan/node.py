"""Generic CAN node: acceptance filter, receive mailbox, transmit queue."""
from collections import deque
from dataclasses import dataclass, field

from .frame import MAX_ID

DEFAULT_RX_CAPACITY = 64

ERROR_ACTIVE = "error-active"
ERROR_PASSIVE = "error-passive"
BUS_OFF = "bus-off"

BUS_OFF_THRESHOLD = 256
PASSIVE_THRESHOLD = 128


@dataclass(frozen=True)
class AcceptanceFilter:
    """Single mask/match pair; ``mask == 0`` accepts everything."""

    mask: int = 0
    match: int = 0

    def __post_init__(self):
        for name in ("mask", "match"):
            value = getattr(self, name)
            if not 0 <= value <= MAX_ID:
                raise ValueError(f"{name} must be an 11-bit value, got {value!r}")

    def accepts(self, ident):
        return filter_accepts(self, ident)


PROMISCUOUS = AcceptanceFilter(0, 0)


def filter_accepts(filt, ident):
    return (ident & filt.mask) == (filt.match & filt.mask)


def exact_filter(ident):
    return AcceptanceFilter(MAX_ID, ident)


class Mailbox:
    """Bounded receive queue of ``(time, frame)``; overflow drops the oldest."""

    def __init__(self, capacity=DEFAULT_RX_CAPACITY):
        if capacity < 1:
            raise ValueError("mailbox capacity must be positive")
        self.capacity = capacity
        self.rx = deque()
        self.overflows = 0

    def push(self, time, frame):
        if len(self.rx) >= self.capacity:
            self.rx.popleft()
            self.overflows += 1
        self.rx.append((time, frame))

    def pop(self):
        return self.rx.popleft() if self.rx else None

    def __len__(self):
        return len(self.rx)


@dataclass
class ErrorCounters:
    transmit_errors: int = 0
    receive_errors: int = 0

    @property
    def state(self):
        if self.transmit_errors >= BUS_OFF_THRESHOLD:
            return BUS_OFF
        if self.transmit_errors >= PASSIVE_THRESHOLD or self.receive_errors >= PASSIVE_THRESHOLD:
            return ERROR_PASSIVE
        return ERROR_ACTIVE

    def transmit_failed(self):
        self.transmit_errors = min(self.transmit_errors + 8, BUS_OFF_THRESHOLD)

    def transmit_ok(self):
        self.transmit_errors = max(self.transmit_errors - 1, 0)

    def receive_failed(self):
        self.receive_errors = min(self.receive_errors + 1, 255)

    def receive_ok(self):
        self.receive_errors = max(self.receive_errors - 1, 0)


@dataclass
class Controller:
    """Per-node controller state owned by the bus."""

    index: int
    filter: AcceptanceFilter
    mailbox: Mailbox
    name: str = ""
    tx: deque = field(default_factory=deque)
    counters: ErrorCounters = field(default_factory=ErrorCounters)
    listener: object = None
    sent: int = 0

    @property
    def bus_off(self):
        return self.counters.state == BUS_OFF

    def accepts(self, ident):
        return filter_accepts(self.filter, ident)


class Node:
    """A transceiver + controller pair attached to a :class:`VirtualBus`.

    ``listener``, when given, is called as ``listener(time, frame)`` for every
    accepted delivery in addition to the mailbox push.
    """

    def __init__(self, bus, filter=PROMISCUOUS, capacity=DEFAULT_RX_CAPACITY, name="", listener=None):
        self.bus = bus
        self.handle = bus.attach(filter, capacity=capacity, name=name, listener=listener)

    @property
    def controller(self):
        return self.bus.controller(self.handle)

    @property
    def name(self):
        return self.controller.name

    @property
    def filter(self):
        return self.controller.filter

    @property
    def counters(self):
        return self.controller.counters

    @property
    def bus_off(self):
        return self.controller.bus_off

    @property
    def overflows(self):
        return self.controller.mailbox.overflows

    def send(self, frame):
        self.bus.queue_tx(self.handle, frame)

    def poll_rx(self):
        return self.controller.mailbox.pop()

    def pending_tx(self):
        return len(self.controller.tx)


def poll_rx(node):
    return node.poll_rx()


def send(node, frame):
    node.send(frame)
