import pytest
from hypothesis import given
from hypothesis import strategies as st

from printcan.errors import TraceFormatError
from printcan.frame import DataFrame
from printcan.trace import TraceRecord, format_trace, parse_line, parse_trace, read_trace, write_trace

records = st.builds(
    TraceRecord,
    timestamp_us=st.integers(0, 10**16 - 1),
    id=st.integers(0, 0x7FF),
    payload=st.binary(max_size=8),
) | st.builds(
    lambda t, i, dlc: TraceRecord(t, i, b"", rtr=True, dlc=dlc),
    st.integers(0, 10**16 - 1),
    st.integers(0, 0x7FF),
    st.integers(0, 8),
)


def test_exact_layout():
    rec = TraceRecord(150_300_123, 0x1A1, bytes.fromhex("810C80"))
    assert rec.format() == "(0000000150.300123) simcan0 1A1#810C80"
    assert TraceRecord(5, 0x7, b"").format() == "(0000000000.000005) simcan0 007#"
    assert TraceRecord(0, 0x123, rtr=True).format() == "(0000000000.000000) simcan0 123#R"
    assert TraceRecord(0, 0x123, rtr=True, dlc=4).format() == "(0000000000.000000) simcan0 123#R4"


def test_from_frame_uses_bitrate():
    rec = TraceRecord.from_frame(1_000_001, DataFrame(0x10, b"\x01"), 500_000)
    assert rec.timestamp_us == 2_000_002
    assert rec.frame == DataFrame(0x10, b"\x01")


@given(st.lists(records, max_size=20))
def test_round_trip(recs):
    assert parse_trace(format_trace(recs)) == recs


@pytest.mark.parametrize(
    "line",
    [
        "(1.000000) simcan0 1A1#81",
        "(0000000001.000000) simcan0 1a1#81",
        "(0000000001.000000) simcan0 1A1#8",
        "(0000000001.000000) simcan0 1A1#001122334455667788",
        "(0000000001.000000) simcan0 800#00",
        "(0000000001.000000) simcan0 1A1-81",
        "(0000000001.000000) simcan0 1A1#R9",
        "garbage",
    ],
)
def test_malformed(line):
    with pytest.raises(TraceFormatError):
        parse_line(line)


def test_single_line():
    rec = parse_line("(0000000001.000000) simcan0 1A1#81\n")
    assert (rec.timestamp, rec.id, rec.payload) == (1.0, 0x1A1, b"\x81")


def test_malformed_reports_line(tmp_path):
    path = tmp_path / "t.log"
    path.write_text("(0000000001.000000) simcan0 1A1#81\nnope\n")
    with pytest.raises(TraceFormatError) as err:
        read_trace(path)
    assert err.value.line == 2


def test_file_round_trip(tmp_path):
    recs = [TraceRecord(i * 1000, 0x100 + i, bytes([i])) for i in range(5)]
    path = tmp_path / "t.log"
    write_trace(path, recs)
    assert read_trace(path) == recs
    assert path.read_bytes().count(b"\n") == 5
