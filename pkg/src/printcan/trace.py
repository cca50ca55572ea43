"""candump log-format traces: ``(0000000150.300123) simcan0 1A1#810F9C``."""
import re
from dataclasses import dataclass

from .errors import TraceFormatError
from .frame import DataFrame

INTERFACE = "simcan0"

_LINE = re.compile(
    r"\((\d{10})\.(\d{6})\) (\S+) ([0-9A-F]{3})#(?:R([0-8])?|((?:[0-9A-F]{2}){0,8}))"
)


@dataclass(frozen=True)
class TraceRecord:
    timestamp_us: int
    id: int
    payload: bytes = b""
    interface: str = INTERFACE
    rtr: bool = False
    dlc: int = None  # remote frames only; 0 is stored as None

    def __post_init__(self):
        object.__setattr__(self, "payload", bytes(self.payload))
        if not self.rtr or not self.dlc:
            object.__setattr__(self, "dlc", None)
        if self.rtr and self.payload:
            raise ValueError("remote frames carry no payload")

    @property
    def timestamp(self):
        return self.timestamp_us / 1_000_000

    @property
    def frame(self):
        return DataFrame(self.id, self.payload, self.rtr, self.dlc if self.rtr else None)

    @classmethod
    def from_frame(cls, ticks, frame, bitrate, interface=INTERFACE):
        us = ticks * 1_000_000 // bitrate
        return cls(us, frame.id, frame.payload, interface, frame.rtr, frame.dlc if frame.rtr else None)

    def format(self):
        sec, us = divmod(self.timestamp_us, 1_000_000)
        if self.rtr:
            data = "R" + (str(self.dlc) if self.dlc else "")
        else:
            data = self.payload.hex().upper()
        return f"({sec:010d}.{us:06d}) {self.interface} {self.id:03X}#{data}"


def parse_line(line, lineno=None):
    m = _LINE.fullmatch(line.rstrip("\r\n"))
    if m is None:
        raise TraceFormatError(f"not a candump record: {line.strip()!r}", lineno)
    sec, us, iface, ident, rtr_len, data = m.groups()
    ident = int(ident, 16)
    if ident > 0x7FF:
        raise TraceFormatError(f"identifier {ident:#x} is not an 11-bit ID", lineno)
    timestamp = int(sec) * 1_000_000 + int(us)
    if data is None:
        return TraceRecord(timestamp, ident, b"", iface, True, int(rtr_len) if rtr_len else None)
    return TraceRecord(timestamp, ident, bytes.fromhex(data), iface)


def format_trace(records):
    return "".join(r.format() + "\n" for r in records)


def parse_trace(text):
    return [parse_line(line, n) for n, line in enumerate(text.splitlines(), 1) if line.strip()]


def write_trace(path, records):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_trace(records))


def read_trace(path):
    with open(path) as fh:
        return parse_trace(fh.read())
