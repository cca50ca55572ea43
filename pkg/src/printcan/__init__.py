"""Simulated CAN-bus 3D printer with an attacker toolkit."""
from .attacks import Attacker, IdMap, TrafficLog, infer_id_map
from .bus import BusEvent, EventKind, VirtualBus
from .errors import (
    BusError,
    BusOff,
    CrcMismatch,
    DecodeError,
    FormatError,
    IncompleteCapture,
    ParseError,
    PrintCanError,
    RegistrationTimeout,
    StuffViolation,
    TraceFormatError,
    UnknownId,
)
from .frame import DataFrame, compute_crc15, decode_frame, destuff_bits, encode_frame, stuff_bits
from .kernels import BACKEND
from .node import AcceptanceFilter, Node
from .plant import ModuleDescriptor, ModuleKind, PlantConfig, Topology, default_topology
from .runner import classify_frame, run_scenario, verify
from .scenario import ScenarioSpec, parse_scenario
from .sim import Simulation, run_registration
from .trace import TraceRecord, parse_trace, format_trace

__version__ = "0.1.0"
