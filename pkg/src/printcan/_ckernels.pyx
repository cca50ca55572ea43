# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled codec kernels; same contract as ``printcan._pykernels``."""
from printcan.errors import StuffViolation

cdef enum:
    CRC15_POLY = 0x4599

cdef unsigned int _table[256]


cdef void _init_table():
    cdef unsigned int byte, crc, k
    for byte in range(256):
        crc = byte << 7
        for k in range(8):
            crc <<= 1
            if crc & 0x8000:
                crc ^= CRC15_POLY
        _table[byte] = crc & 0x7FFF


_init_table()


def crc15(const unsigned char[:] bits):
    cdef Py_ssize_t n = bits.shape[0]
    cdef Py_ssize_t head = n % 8
    cdef Py_ssize_t i, k
    cdef unsigned int crc = 0
    cdef unsigned int byte
    for i in range(head):
        if (bits[i] ^ (crc >> 14)) & 1:
            crc = ((crc << 1) ^ CRC15_POLY) & 0x7FFF
        else:
            crc = (crc << 1) & 0x7FFF
    i = head
    while i < n:
        byte = 0
        for k in range(8):
            byte = (byte << 1) | (bits[i + k] & 1)
        crc = ((crc << 8) ^ _table[((crc >> 7) ^ byte) & 0xFF]) & 0x7FFF
        i += 8
    return crc


def stuff(const unsigned char[:] bits):
    cdef Py_ssize_t n = bits.shape[0]
    cdef bytearray out = bytearray(n + n // 4 + 1)
    cdef unsigned char[:] view = out
    cdef Py_ssize_t i, j = 0
    cdef int last = -1
    cdef int run = 0
    cdef unsigned char bit
    for i in range(n):
        bit = bits[i]
        view[j] = bit
        j += 1
        if bit == last:
            run += 1
        else:
            last = bit
            run = 1
        if run == 5:
            last ^= 1
            view[j] = last
            j += 1
            run = 1
    return bytes(out[:j])


def destuff(const unsigned char[:] bits, Py_ssize_t limit=-1):
    cdef Py_ssize_t n = bits.shape[0]
    cdef bytearray out = bytearray(n)
    cdef unsigned char[:] view = out
    cdef Py_ssize_t i = 0, j = 0
    cdef int last = -1
    cdef int run = 0
    cdef unsigned char bit
    while i < n:
        bit = bits[i]
        if run == 5:
            if bit == last:
                raise StuffViolation(i)
            last = bit
            run = 1
            i += 1
            continue
        if limit >= 0 and j == limit:
            break
        view[j] = bit
        j += 1
        if bit == last:
            run += 1
        else:
            last = bit
            run = 1
        i += 1
    return bytes(out[:j]), i
