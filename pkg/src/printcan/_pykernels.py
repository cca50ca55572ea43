"""Pure-Python codec kernels.

Bit streams are ``bytes`` objects holding one logical bit (0 or 1) per byte;
0 is the dominant level.
"""
from .errors import StuffViolation

CRC15_POLY = 0x4599
_TO_ASCII = bytes.maketrans(b"\x00\x01", b"01")


def _make_table():
    table = []
    for byte in range(256):
        crc = byte << 7
        for _ in range(8):
            crc <<= 1
            if crc & 0x8000:
                crc ^= CRC15_POLY
        table.append(crc & 0x7FFF)
    return table


CRC15_TABLE = tuple(_make_table())


def crc15(bits):
    """Table-driven CRC-15 over a bit stream, zero initial register."""
    n = len(bits)
    head = n % 8
    crc = 0
    for i in range(head):
        if bits[i] ^ (crc >> 14):
            crc = ((crc << 1) ^ CRC15_POLY) & 0x7FFF
        else:
            crc = (crc << 1) & 0x7FFF
    if n > head:
        packed = int(bits[head:].translate(_TO_ASCII), 2).to_bytes((n - head) // 8, "big")
        table = CRC15_TABLE
        for byte in packed:
            crc = ((crc << 8) ^ table[((crc >> 7) ^ byte) & 0xFF]) & 0x7FFF
    return crc


def stuff(bits):
    out = bytearray()
    last = -1
    run = 0
    for bit in bits:
        out.append(bit)
        if bit == last:
            run += 1
        else:
            last = bit
            run = 1
        if run == 5:
            last ^= 1
            out.append(last)
            run = 1
    return bytes(out)


def destuff(bits, limit=-1):
    """Remove stuff bits. Returns ``(raw, consumed)``.

    With ``limit >= 0`` decoding stops after ``limit`` raw bits; a stuff bit
    owed by the final run is still consumed and checked.
    """
    out = bytearray()
    last = -1
    run = 0
    i = 0
    n = len(bits)
    while i < n:
        bit = bits[i]
        if run == 5:
            if bit == last:
                raise StuffViolation(i)
            last = bit
            run = 1
            i += 1
            continue
        if limit >= 0 and len(out) == limit:
            break
        out.append(bit)
        if bit == last:
            run += 1
        else:
            last = bit
            run = 1
        i += 1
    return bytes(out), i
