"""Read classic pcap captures and decode 802.11 MAC headers."""

from __future__ import annotations

import logging
import struct
from collections import Counter
from dataclasses import dataclass, field
from os import PathLike
from typing import BinaryIO, Iterator, Optional, Union

from .frames import FrameKind, InformationElement, MacAddress, ParsedFrame

logger = logging.getLogger(__name__)

PCAP_MAGIC = 0xA1B2C3D4
PCAP_GLOBAL_HEADER_LEN = 24
PCAP_RECORD_HEADER_LEN = 16

LINKTYPE_IEEE802_11 = 105
LINKTYPE_IEEE802_11_RADIOTAP = 127
SUPPORTED_LINK_TYPES = (LINKTYPE_IEEE802_11, LINKTYPE_IEEE802_11_RADIOTAP)

RADIOTAP_PRESENT_TSFT = 1 << 0
RADIOTAP_PRESENT_FLAGS = 1 << 1
RADIOTAP_PRESENT_EXT = 1 << 31
RADIOTAP_FLAG_FCS = 0x10

MGMT_HEADER_LEN = 24
BEACON_FIXED_LEN = 12
FCS_LEN = 4

Source = Union[str, PathLike, BinaryIO]


class CaptureError(Exception):
    """Base class for capture files that cannot be read."""


class MalformedHeader(CaptureError):
    pass


class UnsupportedLinkType(CaptureError):
    pass


class TruncatedRecord(CaptureError):
    pass


class RadiotapTooShort(CaptureError):
    pass


class SkipReason:
    TOO_SHORT = "TooShort"
    BAD_VERSION = "BadVersion"
    MALFORMED_IES = "MalformedIEs"
    BAD_RADIOTAP = "RadiotapTooShort"


@dataclass(frozen=True)
class Skip:
    reason: str


@dataclass(frozen=True)
class CaptureRecord:
    timestamp_us: int
    link_type: int
    payload: bytes


@dataclass
class IngestStats:
    frames_read: int = 0
    frames_parsed: int = 0
    frames_skipped: int = 0
    skip_reasons: Counter = field(default_factory=Counter)

    def skip(self, reason: str) -> None:
        self.frames_skipped += 1
        self.skip_reasons[reason] += 1

    def summary(self) -> str:
        text = (f"frames_read={self.frames_read} frames_parsed={self.frames_parsed} "
                f"frames_skipped={self.frames_skipped}")
        if self.skip_reasons:
            reasons = ",".join(f"{k}:{v}" for k, v in sorted(self.skip_reasons.items()))
            text += f" skip_reasons={reasons}"
        return text


class CaptureReader:
    """Iterate over the records of a classic pcap file.

    Both byte orders and the nanosecond-resolution magic are accepted;
    nanosecond timestamps are truncated to microseconds. The global header
    is validated on construction so bad files fail before iteration starts.
    """

    def __init__(self, source: Source):
        if hasattr(source, "read"):
            self._fh = source
            self._owned = False
        else:
            self._fh = open(source, "rb")
            self._owned = True
        try:
            self._read_global_header()
        except Exception:
            self.close()
            raise
        self.records_read = 0

    def _read_global_header(self) -> None:
        header = self._fh.read(PCAP_GLOBAL_HEADER_LEN)
        if len(header) < PCAP_GLOBAL_HEADER_LEN:
            raise MalformedHeader("file shorter than the pcap global header")
        for endian in ("<", ">"):
            magic = struct.unpack(endian + "I", header[:4])[0]
            if magic == PCAP_MAGIC:
                self._ts_div = 1
                break
            if magic == 0xA1B23C4D:
                self._ts_div = 1000
                break
        else:
            raise MalformedHeader(f"bad pcap magic {header[:4].hex()}")
        self._endian = endian
        (_, self.version_major, self.version_minor, _, _,
         self.snaplen, self.link_type) = struct.unpack(endian + "IHHiIII", header)
        if self.link_type not in SUPPORTED_LINK_TYPES:
            raise UnsupportedLinkType(
                f"link type {self.link_type} not supported (expected 105 or 127)")

    def __iter__(self) -> Iterator[CaptureRecord]:
        record_fmt = self._endian + "IIII"
        while True:
            header = self._fh.read(PCAP_RECORD_HEADER_LEN)
            if not header:
                return
            if len(header) < PCAP_RECORD_HEADER_LEN:
                raise TruncatedRecord(
                    f"record {self.records_read}: header cut short ({len(header)} bytes)")
            ts_sec, ts_frac, incl_len, _orig_len = struct.unpack(record_fmt, header)
            payload = self._fh.read(incl_len)
            if len(payload) < incl_len:
                raise TruncatedRecord(
                    f"record {self.records_read}: declared {incl_len} bytes, "
                    f"found {len(payload)}")
            self.records_read += 1
            yield CaptureRecord(ts_sec * 1_000_000 + ts_frac // self._ts_div,
                                self.link_type, payload)

    def close(self) -> None:
        if self._owned:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_capture(source: Source) -> CaptureReader:
    return CaptureReader(source)


def strip_radiotap(payload: bytes, link_type: int,
                   assume_fcs: bool = False) -> tuple[bytes, bool]:
    """Return the bare 802.11 frame and whether it ends in an FCS.

    For radiotap captures the FCS flag is taken from the radiotap Flags field
    when that field is present; ``assume_fcs`` only applies when there is no
    flag to read (link type 105, or radiotap without Flags).
    """
    if link_type == LINKTYPE_IEEE802_11:
        return payload, assume_fcs
    if link_type != LINKTYPE_IEEE802_11_RADIOTAP:
        raise UnsupportedLinkType(f"link type {link_type} not supported")

    if len(payload) < 8:
        raise RadiotapTooShort(f"radiotap header needs 8 bytes, payload has {len(payload)}")
    rt_len = struct.unpack_from("<H", payload, 2)[0]
    if rt_len > len(payload) or rt_len < 8:
        raise RadiotapTooShort(
            f"radiotap declares {rt_len} bytes, payload has {len(payload)}")

    # Walk the chain of presence words; only the first one describes the
    # standard fields we care about.
    present = struct.unpack_from("<I", payload, 4)[0]
    offset = 8
    word = present
    while word & RADIOTAP_PRESENT_EXT:
        if offset + 4 > rt_len:
            raise RadiotapTooShort("radiotap presence bitmap runs past header")
        word = struct.unpack_from("<I", payload, offset)[0]
        offset += 4

    fcs = assume_fcs
    if present & RADIOTAP_PRESENT_FLAGS:
        if present & RADIOTAP_PRESENT_TSFT:
            offset = (offset + 7) & ~7
            offset += 8
        if offset >= rt_len:
            raise RadiotapTooShort("radiotap flags field runs past header")
        fcs = bool(payload[offset] & RADIOTAP_FLAG_FCS)
    return payload[rt_len:], fcs


def parse_ies(body: bytes) -> Optional[tuple[InformationElement, ...]]:
    """Split a TLV body into IEs; None if any length overruns the body."""
    ies = []
    pos = 0
    n = len(body)
    while pos < n:
        if pos + 2 > n:
            return None
        tag, length = body[pos], body[pos + 1]
        end = pos + 2 + length
        if end > n:
            return None
        ies.append(InformationElement(tag, body[pos + 2:end]))
        pos = end
    return tuple(ies)


def _mac(frame: bytes, offset: int) -> MacAddress:
    return MacAddress(frame[offset:offset + 6])


def parse_frame(frame: bytes, fcs_present: bool = False,
                timestamp_us: int = 0) -> Union[ParsedFrame, Skip]:
    """Decode one 802.11 frame into a ParsedFrame, or a Skip with the reason.

    Never raises on arbitrary input.
    """
    if fcs_present:
        if len(frame) < FCS_LEN:
            return Skip(SkipReason.TOO_SHORT)
        frame = frame[:-FCS_LEN]
    if len(frame) < 2:
        return Skip(SkipReason.TOO_SHORT)

    fc = frame[0] | (frame[1] << 8)
    if fc & 0x3:
        return Skip(SkipReason.BAD_VERSION)
    ftype = (fc >> 2) & 0x3
    subtype = (fc >> 4) & 0xF
    kind = FrameKind.from_type_subtype(ftype, subtype)

    if ftype in (0, 2):
        if len(frame) < MGMT_HEADER_LEN:
            return Skip(SkipReason.TOO_SHORT)
        seq_ctrl = frame[22] | (frame[23] << 8)
        ies: tuple[InformationElement, ...] = ()
        if kind is FrameKind.PROBE_REQUEST or kind is FrameKind.BEACON:
            body = frame[MGMT_HEADER_LEN:]
            if kind is FrameKind.BEACON:
                if len(body) < BEACON_FIXED_LEN:
                    return Skip(SkipReason.TOO_SHORT)
                body = body[BEACON_FIXED_LEN:]
            parsed = parse_ies(body)
            if parsed is None:
                return Skip(SkipReason.MALFORMED_IES)
            ies = parsed
        return ParsedFrame(kind, _mac(frame, 4), _mac(frame, 10), seq_ctrl >> 4,
                           ies, timestamp_us, seq_ctrl & 0xF)

    # Control and extension frames: classification only. addr1 is always
    # there past the duration field; a transmitter address may follow.
    if len(frame) < 10:
        return Skip(SkipReason.TOO_SHORT)
    addr2 = _mac(frame, 10) if len(frame) >= 16 else None
    return ParsedFrame(kind, _mac(frame, 4), addr2, None, (), timestamp_us)


def iter_frames(records, stats: Optional[IngestStats] = None,
                assume_fcs: bool = False) -> Iterator[ParsedFrame]:
    """Turn capture records into parsed frames, tallying skips in ``stats``."""
    if stats is None:
        stats = IngestStats()
    for record in records:
        stats.frames_read += 1
        try:
            frame, fcs = strip_radiotap(record.payload, record.link_type, assume_fcs)
        except RadiotapTooShort:
            stats.skip(SkipReason.BAD_RADIOTAP)
            continue
        result = parse_frame(frame, fcs, record.timestamp_us)
        if isinstance(result, Skip):
            stats.skip(result.reason)
            continue
        stats.frames_parsed += 1
        yield result


def load_frames(source: Source, assume_fcs: bool = False) -> tuple[list[ParsedFrame], IngestStats]:
    """Read a whole capture into memory."""
    stats = IngestStats()
    with read_capture(source) as reader:
        frames = list(iter_frames(reader, stats, assume_fcs))
    logger.debug("loaded %s: %s", source, stats.summary())
    return frames, stats
