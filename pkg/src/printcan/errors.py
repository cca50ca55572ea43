"""Exception types shared across the package."""


class PrintCanError(Exception):
    """Base class for all printcan errors."""


class DecodeError(PrintCanError):
    """A bit stream could not be decoded into a frame."""


class StuffViolation(DecodeError):
    """Six identical consecutive bits inside a stuffed region."""

    def __init__(self, position):
        super().__init__(f"stuff violation at stuffed bit {position}")
        self.position = position


class CrcMismatch(DecodeError):
    def __init__(self, received, computed):
        super().__init__(f"CRC mismatch: received 0x{received:04X}, computed 0x{computed:04X}")
        self.received = received
        self.computed = computed


class FormatError(DecodeError):
    """Bad field lengths, DLC > 8, extended identifier or nonzero reserved bit."""


class BusOff(PrintCanError):
    """The node's fault-confinement state forbids transmission."""


class BusError(PrintCanError):
    """Misuse of the virtual bus (unknown handle, attach after finalize)."""


class RegistrationTimeout(PrintCanError):
    def __init__(self, missing):
        names = ", ".join(missing)
        super().__init__(f"modules never answered enumeration: {names}")
        self.missing = list(missing)


class IncompleteCapture(PrintCanError):
    """A traffic log lacks the registration request needed for inference."""


class ParseError(PrintCanError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class TraceFormatError(PrintCanError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class UnknownId(PrintCanError):
    """Identifier absent from the topology role table."""
