"""CAN 2.0A standard frame codec.

Bit streams are ``bytes`` with one logical bit per byte (0 = dominant,
1 = recessive). Stuffing covers SOF through CRC; the CRC delimiter, ACK
field and EOF are sent unstuffed.
"""
from dataclasses import dataclass, field
from functools import lru_cache

from . import kernels
from .errors import CrcMismatch, FormatError

MAX_ID = 0x7FF
HEADER_BITS = 19  # SOF + 11 id + RTR + IDE + r0 + 4 DLC
TAIL_BITS = 10  # CRC delimiter + ACK slot + ACK delimiter + 7 EOF
INTERFRAME_BITS = 3
ERROR_FLAG_BITS = 6
ERROR_DELIMITER_BITS = 8

_FROM_ASCII = bytes.maketrans(b"01", b"\x00\x01")
_TO_ASCII = bytes.maketrans(b"\x00\x01", b"01")
_TAIL = bytes([1]) * TAIL_BITS


def bits_from_str(text):
    """``"0110"`` -> ``b"\\x00\\x01\\x01\\x00"``."""
    return text.encode("ascii").translate(_FROM_ASCII)


def bits_to_str(bits):
    return bytes(bits).translate(_TO_ASCII).decode("ascii")


def _uint_bits(value, width):
    return format(value, f"0{width}b").encode("ascii").translate(_FROM_ASCII)


def check_id(value):
    if not isinstance(value, int) or not 0 <= value <= MAX_ID:
        raise ValueError(f"CAN identifier out of 11-bit range: {value!r}")
    return value


@dataclass(frozen=True)
class DataFrame:
    """One standard-format data or remote frame.

    ``dlc`` defaults to ``len(payload)``. Remote frames carry no payload but
    may request a nonzero length.
    """

    id: int
    payload: bytes = b""
    rtr: bool = False
    dlc: int = field(default=None)

    def __post_init__(self):
        check_id(self.id)
        payload = bytes(self.payload)
        object.__setattr__(self, "payload", payload)
        object.__setattr__(self, "rtr", bool(self.rtr))
        if self.dlc is None:
            object.__setattr__(self, "dlc", len(payload))
        if not 0 <= self.dlc <= 8:
            raise ValueError(f"dlc must be 0..8, got {self.dlc}")
        if self.rtr:
            if payload:
                raise ValueError("remote frames carry no payload")
        elif len(payload) != self.dlc:
            raise ValueError(f"dlc {self.dlc} does not match payload length {len(payload)}")

    @property
    def crc(self):
        return _crc_of(self)

    def __repr__(self):
        kind = f"R{self.dlc}" if self.rtr else self.payload.hex().upper()
        return f"DataFrame(0x{self.id:03X}#{kind})"


def raw_bits(frame):
    """Unstuffed SOF-through-data bit image (the CRC input)."""
    parts = [
        b"\x00",
        _uint_bits(frame.id, 11),
        b"\x01" if frame.rtr else b"\x00",
        b"\x00\x00",
        _uint_bits(frame.dlc, 4),
    ]
    if frame.payload:
        parts.append(_uint_bits(int.from_bytes(frame.payload, "big"), 8 * len(frame.payload)))
    return b"".join(parts)


def arbitration_bits(frame):
    """The 12 bits contended during arbitration: identifier then RTR."""
    return _uint_bits((frame.id << 1) | int(frame.rtr), 12)


def compute_crc15(bits):
    return kernels.crc15(bytes(bits))


def stuff_bits(raw):
    return kernels.stuff(bytes(raw))


def destuff_bits(stuffed):
    raw, _ = kernels.destuff(bytes(stuffed))
    return raw


@lru_cache(maxsize=8192)
def _crc_of(frame):
    return kernels.crc15(raw_bits(frame))


@lru_cache(maxsize=8192)
def encode_frame(frame):
    raw = raw_bits(frame)
    region = raw + _uint_bits(kernels.crc15(raw), 15)
    return kernels.stuff(region) + _TAIL


@lru_cache(maxsize=8192)
def header_length(frame):
    """Stuffed length of SOF..DLC, where an ID-targeting error flag starts."""
    return len(kernels.stuff(raw_bits(frame)[:HEADER_BITS]))


def frame_length(frame):
    return len(encode_frame(frame))


def decode_frame(bits):
    """Inverse of :func:`encode_frame`.

    Raises StuffViolation, FormatError or CrcMismatch. The ACK slot may be
    either level (dominant once acknowledged on the bus).
    """
    bits = bytes(bits)
    if any(b > 1 for b in bits):
        raise FormatError("bit stream holds values other than 0/1")
    header, _ = kernels.destuff(bits, HEADER_BITS)
    if len(header) < HEADER_BITS:
        raise FormatError("stream ends inside the header")
    if header[0] != 0:
        raise FormatError("SOF must be dominant")
    if header[13] != 0:
        raise FormatError("extended (29-bit) identifiers are not supported")
    if header[14] != 0:
        raise FormatError("reserved bit r0 must be dominant")
    ident = int(bits_to_str(header[1:12]), 2)
    rtr = header[12] == 1
    dlc = int(bits_to_str(header[15:19]), 2)
    if dlc > 8:
        raise FormatError(f"dlc {dlc} exceeds 8")
    data_bits = 0 if rtr else 8 * dlc
    total = HEADER_BITS + data_bits + 15
    raw, consumed = kernels.destuff(bits, total)
    if len(raw) < total:
        raise FormatError("stream ends inside the data or CRC field")
    tail = bits[consumed:]
    if len(tail) != TAIL_BITS:
        raise FormatError(f"expected {TAIL_BITS} trailing bits, got {len(tail)}")
    if tail[0] != 1:
        raise FormatError("CRC delimiter must be recessive")
    if tail[2] != 1 or any(b != 1 for b in tail[3:]):
        raise FormatError("ACK delimiter and EOF must be recessive")
    received = int(bits_to_str(raw[HEADER_BITS + data_bits:]), 2)
    computed = kernels.crc15(raw[: HEADER_BITS + data_bits])
    if received != computed:
        raise CrcMismatch(received, computed)
    payload = b""
    if data_bits:
        payload = int(bits_to_str(raw[HEADER_BITS:HEADER_BITS + data_bits]), 2).to_bytes(dlc, "big")
    return DataFrame(ident, payload, rtr=rtr, dlc=dlc)
