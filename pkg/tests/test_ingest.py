import io
import struct

import pytest
from hypothesis import given, strategies as st

from crowdcount.frames import FrameKind, InformationElement
from crowdcount.ingest import (IngestStats, MalformedHeader, RadiotapTooShort, Skip,
                               SkipReason, TruncatedRecord, UnsupportedLinkType,
                               iter_frames, load_frames, parse_frame, read_capture,
                               strip_radiotap)
from crowdcount.synth import write_capture

from conftest import beacon, data, mac, probe, RATES, VENDOR

scapy_dot11 = pytest.importorskip("scapy.layers.dot11")
from scapy.layers.dot11 import (Dot11, Dot11Beacon, Dot11Elt, Dot11FCS,  # noqa: E402
                                Dot11ProbeReq, RadioTap)
from scapy.utils import PcapReader  # noqa: E402

A = "00:1d:73:a0:4c:10"
B = "3c:22:fb:11:20:01"
C = "da:a1:19:00:00:07"


def global_header(link_type=105, endian="<", magic=0xA1B2C3D4):
    return struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, link_type)


def record(payload, ts_sec=1, ts_usec=0, endian="<", incl=None):
    incl = len(payload) if incl is None else incl
    return struct.pack(endian + "IIII", ts_sec, ts_usec, incl, len(payload)) + payload


# --- read_capture -----------------------------------------------------------

def test_empty_capture_yields_nothing():
    frames, stats = load_frames(io.BytesIO(global_header()))
    assert frames == [] and stats.frames_read == 0


def test_three_records_round_trip_in_order():
    frames = [beacon(A, ts=1_000_000, seq=1), data(A, B, ts=1_000_500, seq=2),
              probe(C, [RATES], ts=2_000_001, seq=3)]
    buf = io.BytesIO()
    write_capture(frames, buf)
    buf.seek(0)
    records = list(read_capture(buf))
    assert [r.timestamp_us for r in records] == [1_000_000, 1_000_500, 2_000_001]
    assert all(r.link_type == 105 for r in records)
    buf.seek(0)
    assert load_frames(buf)[0] == frames


def test_big_endian_and_nanosecond_files():
    raw = bytes(Dot11(type=2, subtype=0, addr1=A, addr2=B, addr3=A, SC=0x10))
    blob = global_header(endian=">") + record(raw, 7, 250, endian=">")
    [rec] = read_capture(io.BytesIO(blob))
    assert rec.timestamp_us == 7_000_250 and rec.payload == raw

    blob = global_header(magic=0xA1B23C4D) + record(raw, 7, 250_999)
    [rec] = read_capture(io.BytesIO(blob))
    assert rec.timestamp_us == 7_000_250


def test_bad_magic():
    with pytest.raises(MalformedHeader):
        read_capture(io.BytesIO(b"\x00" * 24))
    with pytest.raises(MalformedHeader):
        read_capture(io.BytesIO(b"\xd4\xc3"))


def test_unsupported_link_type():
    with pytest.raises(UnsupportedLinkType):
        read_capture(io.BytesIO(global_header(link_type=1)))


def test_truncated_record_after_good_ones():
    raw = bytes(Dot11(type=2, subtype=0, addr1=A, addr2=B, addr3=A))
    blob = global_header() + record(raw) + record(raw) + record(raw)[:-5]
    reader = read_capture(io.BytesIO(blob))
    got = []
    with pytest.raises(TruncatedRecord):
        for rec in reader:
            got.append(rec)
    assert len(got) == 2

    with pytest.raises(TruncatedRecord):
        list(read_capture(io.BytesIO(global_header() + record(raw)[:10])))


# --- strip_radiotap -----------------------------------------------------------

def test_link_105_is_identity():
    assert strip_radiotap(b"abc", 105) == (b"abc", False)
    assert strip_radiotap(b"abc", 105, assume_fcs=True) == (b"abc", True)


@pytest.mark.parametrize("present, fields, fcs", [
    ("Flags", dict(Flags="FCS"), True),
    ("Flags", dict(Flags=0), False),
    ("TSFT+Flags", dict(mac_timestamp=123456789, Flags="FCS"), True),
    ("TSFT+Flags+Rate+Channel", dict(mac_timestamp=5, Flags=0, Rate=2,
                                     ChannelFrequency=2437, ChannelFlags=0xA0), False),
    ("Rate", dict(Rate=2), False),
])
def test_radiotap_against_scapy(present, fields, fcs):
    dot11 = (Dot11FCS if fcs else Dot11)(type=0, subtype=4, addr1="ff:ff:ff:ff:ff:ff",
                                         addr2=C, addr3="ff:ff:ff:ff:ff:ff", SC=0x0120)
    pkt = RadioTap(present=present, **fields) / dot11 / Dot11ProbeReq() / \
        Dot11Elt(ID=0, info=b"") / Dot11Elt(ID=1, info=RATES[1])
    raw = bytes(pkt)
    ref = RadioTap(raw)
    frame, has_fcs = strip_radiotap(raw, 127)
    assert len(raw) - len(frame) == ref.len
    assert has_fcs is fcs
    parsed = parse_frame(frame, has_fcs, 0)
    inner = ref[Dot11FCS] if fcs else ref[Dot11]
    assert str(parsed.addr2) == inner.addr2
    assert parsed.seq_num == inner.SC >> 4
    assert parsed.ies == (InformationElement(0, b""), InformationElement(1, RATES[1]))


def test_radiotap_declared_length_exceeds_payload():
    payload = struct.pack("<BBHI", 0, 0, 64, 0) + b"\x00" * 24
    assert len(payload) == 32
    with pytest.raises(RadiotapTooShort):
        strip_radiotap(payload, 127)
    with pytest.raises(RadiotapTooShort):
        strip_radiotap(b"\x00\x00", 127)


def test_radiotap_extended_presence_words():
    # two presence words; flags in first word, after the second word
    header = struct.pack("<BBHIIB", 0, 0, 13, 0x80000002, 0, 0x10)
    frame, fcs = strip_radiotap(header + b"FRAME", 127)
    assert frame == b"FRAME" and fcs is True


# --- parse_frame --------------------------------------------------------------

def test_frame_control_kinds():
    body = bytes(30)
    assert parse_frame(b"\x40\x00" + body).kind is FrameKind.PROBE_REQUEST
    assert parse_frame(b"\x08\x00" + body).kind is FrameKind.DATA
    # beacon body: 12 fixed bytes then IEs
    assert parse_frame(b"\x80\x00" + bytes(22) + bytes(12) + b"\x00\x00").kind is FrameKind.BEACON


def test_sequence_control_against_scapy():
    raw = bytes(Dot11(type=0, subtype=4, addr1="ff:ff:ff:ff:ff:ff", addr2=C,
                      addr3="ff:ff:ff:ff:ff:ff", SC=0x015A))
    assert raw[22:24] == b"\x5a\x01"
    ref = Dot11(raw)
    parsed = parse_frame(raw)
    assert parsed.fragment == ref.SC & 0xF == 0xA
    assert parsed.seq_num == ref.SC >> 4 == 21


@pytest.mark.parametrize("subtype", [0, 4, 8, 12])
def test_data_subtypes_against_scapy(subtype):
    raw = bytes(Dot11(type=2, subtype=subtype, FCfield=1, addr1=A, addr2=B, addr3=A,
                      SC=4095 << 4) / b"payload")
    ref = Dot11(raw)
    parsed = parse_frame(raw)
    assert parsed.kind is FrameKind.DATA
    assert (str(parsed.addr1), str(parsed.addr2)) == (ref.addr1, ref.addr2)
    assert parsed.seq_num == 4095 and parsed.ies == ()


def test_beacon_ies_against_scapy():
    pkt = Dot11(type=0, subtype=8, addr1="ff:ff:ff:ff:ff:ff", addr2=A, addr3=A) / \
        Dot11Beacon(cap=0x0401) / Dot11Elt(ID=0, info=b"lab") / \
        Dot11Elt(ID=1, info=RATES[1]) / Dot11Elt(ID=3, info=b"\x06")
    parsed = parse_frame(bytes(pkt))
    ref_ies = []
    elt = Dot11(bytes(pkt)).getlayer(Dot11Elt)
    while elt is not None:
        ref_ies.append(InformationElement(elt.ID, elt.info))
        elt = elt.payload.getlayer(Dot11Elt)
    assert parsed.kind is FrameKind.BEACON
    assert list(parsed.ies) == ref_ies


def test_control_frames_are_other():
    ack = bytes(Dot11(type=1, subtype=13, addr1=A))
    parsed = parse_frame(ack)
    assert parsed.kind is FrameKind.OTHER and parsed.addr2 is None and parsed.seq_num is None
    rts = bytes(Dot11(type=1, subtype=11, addr1=A, addr2=B))
    assert parse_frame(rts).addr2 == mac(B)


def test_skip_reasons():
    assert parse_frame(b"") == Skip(SkipReason.TOO_SHORT)
    assert parse_frame(b"\x40\x00" + bytes(10)) == Skip(SkipReason.TOO_SHORT)
    assert parse_frame(b"\x41\x00" + bytes(30)) == Skip(SkipReason.BAD_VERSION)
    overrun = b"\x40\x00" + bytes(22) + b"\x01\x08\x02\x04"
    assert parse_frame(overrun) == Skip(SkipReason.MALFORMED_IES)
    dangling = b"\x40\x00" + bytes(22) + b"\x01"
    assert parse_frame(dangling) == Skip(SkipReason.MALFORMED_IES)


def test_fcs_is_removed():
    frame = probe(C, [RATES, VENDOR], seq=9)
    buf = io.BytesIO()
    write_capture([frame], buf, fcs=True)
    buf.seek(0)
    [rec] = read_capture(buf)
    assert parse_frame(rec.payload, False) == Skip(SkipReason.MALFORMED_IES)
    assert parse_frame(rec.payload, True) == frame
    ref = Dot11FCS(rec.payload)
    assert ref.fcs == struct.unpack("<I", rec.payload[-4:])[0]


@given(st.binary(max_size=80), st.booleans())
def test_parse_frame_never_raises(raw, fcs):
    result = parse_frame(raw, fcs, 0)
    assert isinstance(result, Skip) or 0 <= (result.seq_num or 0) <= 4095


@given(st.binary(max_size=60))
def test_pipeline_never_raises_on_radiotap_garbage(raw):
    stats = IngestStats()
    blob = global_header(127) + record(raw)
    frames = list(iter_frames(read_capture(io.BytesIO(blob)), stats))
    assert stats.frames_read == 1 == stats.frames_parsed + stats.frames_skipped
    assert len(frames) == stats.frames_parsed


def test_written_pcap_readable_by_scapy(tmp_path):
    frames = [beacon(A, ts=1_600_000_000_000_001, seq=10),
              data(A, B, ts=1_600_000_000_500_000, seq=11),
              probe(C, [(0, b"x"), RATES, (3, b"\x01"), VENDOR], ts=1_600_000_001_000_000, seq=12)]
    for link in (105, 127):
        path = tmp_path / f"out{link}.pcap"
        write_capture(frames, path, link)
        with PcapReader(str(path)) as reader:
            pkts = list(reader)
        assert len(pkts) == 3
        for frame, pkt in zip(frames, pkts):
            assert round(float(pkt.time) * 1e6) == frame.timestamp_us
            dot = pkt[Dot11]
            assert dot.addr2 == str(frame.addr2) and dot.SC >> 4 == frame.seq_num
        assert pkts[2].haslayer(Dot11ProbeReq)
