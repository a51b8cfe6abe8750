"""Synthetic monitor-mode traffic and a pcap writer for it.

A scenario lists access points, clients associated with them, and stations
that only probe. ``synth_frames`` turns it into a time-ordered frame list in
which every transmitter owns one 12-bit sequence counter, bumped once per
frame it sends. ``write_capture`` serialises frames so that
``crowdcount.ingest`` reads back exactly the same ParsedFrame values.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources
from os import PathLike
from pathlib import Path
from typing import BinaryIO, Iterable, Optional, Union

import numpy as np

from .frames import (BROADCAST, DEFAULT_IE_FILTER, FrameKind, InformationElement,
                     MacAddress, ParsedFrame)
from .ingest import (LINKTYPE_IEEE802_11, LINKTYPE_IEEE802_11_RADIOTAP, PCAP_MAGIC,
                     RADIOTAP_FLAG_FCS, RADIOTAP_PRESENT_FLAGS)

SCENARIO_HEADER = "crowdcount-scenario"
SCENARIO_VERSION = 1
BUNDLED_SCENARIOS = ("paper-440",)

DEFAULT_RATES = InformationElement(1, bytes.fromhex("82848b960c121824"))
BEACON_INTERVAL_TU = 100
# ESS capability bit
BEACON_CAPABILITY = 0x0001

# fixed-size LLC/SNAP stub carried by synthetic data frames
DATA_PAYLOAD = bytes.fromhex("aaaa030000000800")

_FC_BYTE0 = {
    FrameKind.PROBE_REQUEST: 0x40,
    FrameKind.BEACON: 0x80,
    FrameKind.DATA: 0x08,
    # written as an Action frame, which decodes back to OTHER
    FrameKind.OTHER: 0xD0,
}


class InvalidScenario(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ApSpec:
    mac: MacAddress
    beacons: int
    ssid: bytes = b"crowdcount"
    channel: int = 6


@dataclass(frozen=True)
class ClientSpec:
    mac: MacAddress
    ap: MacAddress
    frames: int


@dataclass(frozen=True)
class ProberSpec:
    """A station that only sends probe requests.

    ``ies`` is the device-characteristic part of the body; per probe an SSID
    element (cycling through ``ssids``) is put in front and a DSSS element
    (cycling through ``channels``) is placed after the leading rate elements.
    With ``mac=None`` every probe uses a fresh locally administered address.
    """

    ies: tuple[InformationElement, ...]
    probes: int
    mac: Optional[MacAddress] = None
    start_seq: int = 0
    ssids: tuple[bytes, ...] = (b"",)
    channels: tuple[int, ...] = (1,)

    @property
    def randomized(self) -> bool:
        return self.mac is None


@dataclass(frozen=True)
class SynthScenario:
    aps: tuple[ApSpec, ...] = ()
    connected: tuple[ClientSpec, ...] = ()
    probers: tuple[ProberSpec, ...] = ()
    start_us: int = 0
    duration_us: int = 60_000_000
    seed: int = 0

    def validate(self) -> None:
        if self.duration_us <= 0:
            raise InvalidScenario("duration must be positive")
        if self.start_us < 0:
            raise InvalidScenario("start must not precede the epoch")
        ap_macs = [ap.mac for ap in self.aps]
        if len(set(ap_macs)) != len(ap_macs):
            raise InvalidScenario("duplicate AP address")
        device_macs = [c.mac for c in self.connected] + [p.mac for p in self.probers if p.mac]
        for mac in ap_macs + device_macs:
            if mac.is_multicast:
                raise InvalidScenario(f"{mac} is a group address")
        if set(ap_macs) & set(device_macs):
            raise InvalidScenario("AP and device addresses overlap")
        for ap in self.aps:
            if ap.beacons < 0:
                raise InvalidScenario(f"negative beacon count for {ap.mac}")
            if not 0 <= ap.channel <= 255 or len(ap.ssid) > 32:
                raise InvalidScenario(f"bad SSID or channel for {ap.mac}")
        for client in self.connected:
            if client.ap not in ap_macs:
                raise InvalidScenario(f"client {client.mac} references unknown AP {client.ap}")
            if client.frames < 0:
                raise InvalidScenario(f"negative frame count for {client.mac}")
        for prober in self.probers:
            if prober.probes < 0:
                raise InvalidScenario("negative probe count")
            if not 0 <= prober.start_seq <= 4095:
                raise InvalidScenario(f"start_seq out of range: {prober.start_seq}")
            if not prober.ssids or any(len(s) > 32 for s in prober.ssids):
                raise InvalidScenario("prober needs SSIDs of at most 32 octets")
            if any(not 0 <= ch <= 255 for ch in prober.channels):
                raise InvalidScenario("channel out of range")
            if any(ie.tag in DEFAULT_IE_FILTER for ie in prober.ies):
                raise InvalidScenario("prober ies must not include SSID or DSSS elements")


def _random_local_mac(rng: np.random.Generator, taken: set[MacAddress]) -> MacAddress:
    while True:
        octets = bytearray(rng.integers(0, 256, size=6, dtype=np.uint8).tobytes())
        octets[0] = (octets[0] & 0xFC) | 0x02
        mac = MacAddress(bytes(octets))
        if mac not in taken:
            taken.add(mac)
            return mac


def _probe_ies(prober: ProberSpec, k: int) -> tuple[InformationElement, ...]:
    ies = [InformationElement(0, prober.ssids[k % len(prober.ssids)])]
    body = list(prober.ies)
    lead = 0
    while lead < len(body) and body[lead].tag in (1, 50):
        lead += 1
    ies.extend(body[:lead])
    if prober.channels:
        ies.append(InformationElement(3, bytes([prober.channels[k % len(prober.channels)]])))
    ies.extend(body[lead:])
    return tuple(ies)


def synth_frames(scenario: SynthScenario,
                 rng: Optional[np.random.Generator] = None) -> list[ParsedFrame]:
    scenario.validate()
    if rng is None:
        rng = np.random.default_rng(scenario.seed)

    def times(n: int) -> list[int]:
        drawn = rng.integers(scenario.start_us, scenario.start_us + scenario.duration_us,
                             size=n)
        return sorted(int(t) for t in drawn)

    # (time, transmitter key, kind, addr1, addr2, ies)
    events = []
    counters: dict[object, int] = {}

    for ap in scenario.aps:
        counters[ap.mac] = int(rng.integers(0, 4096))
        beacon_ies = (InformationElement(0, ap.ssid), DEFAULT_RATES,
                      InformationElement(3, bytes([ap.channel])))
        for t in times(ap.beacons):
            events.append((t, ap.mac, FrameKind.BEACON, BROADCAST, ap.mac, beacon_ies))

    for client in scenario.connected:
        counters[client.mac] = int(rng.integers(0, 4096))
        for k, t in enumerate(times(client.frames)):
            if k % 2 == 0:
                events.append((t, client.mac, FrameKind.DATA, client.ap, client.mac, ()))
            else:
                events.append((t, client.ap, FrameKind.DATA, client.mac, client.ap, ()))

    taken = {ap.mac for ap in scenario.aps} | {c.mac for c in scenario.connected}
    taken |= {p.mac for p in scenario.probers if p.mac}
    for index, prober in enumerate(scenario.probers):
        key = ("prober", index)
        counters[key] = prober.start_seq
        for k, t in enumerate(times(prober.probes)):
            src = prober.mac if prober.mac else _random_local_mac(rng, taken)
            events.append((t, key, FrameKind.PROBE_REQUEST, BROADCAST, src,
                           _probe_ies(prober, k)))

    # Python's sort is stable, so same-time frames keep generation order.
    events.sort(key=lambda e: e[0])
    frames = []
    for t, key, kind, addr1, addr2, ies in events:
        seq = counters[key]
        counters[key] = (seq + 1) % 4096
        frames.append(ParsedFrame(kind, addr1, addr2, seq, ies, t))
    return frames


# ---------------------------------------------------------------------------
# encoding

def encode_frame(frame: ParsedFrame) -> bytes:
    """Serialise a ParsedFrame to 802.11 bytes (no FCS)."""
    if frame.addr1 is None or frame.addr2 is None or frame.seq_num is None:
        raise ValueError("only frames with two addresses and a sequence number can be encoded")
    if frame.kind is FrameKind.BEACON:
        addr3 = frame.addr2
    elif frame.kind is FrameKind.PROBE_REQUEST:
        addr3 = BROADCAST
    else:
        addr3 = frame.addr1
    seq_ctrl = frame.seq_num << 4 | frame.fragment
    header = (bytes((_FC_BYTE0[frame.kind], 0)) + b"\x00\x00" + frame.addr1.octets
              + frame.addr2.octets + addr3.octets + struct.pack("<H", seq_ctrl))
    if frame.kind is FrameKind.BEACON:
        body = struct.pack("<QHH", frame.timestamp_us & (2**64 - 1), BEACON_INTERVAL_TU,
                           BEACON_CAPABILITY)
        body += b"".join(ie.encode() for ie in frame.ies)
    elif frame.kind is FrameKind.PROBE_REQUEST:
        body = b"".join(ie.encode() for ie in frame.ies)
    elif frame.kind is FrameKind.DATA:
        body = DATA_PAYLOAD
    else:
        body = b""
    return header + body


def radiotap_header(fcs: bool) -> bytes:
    """Minimal radiotap header: presence word with only the Flags field."""
    flags = RADIOTAP_FLAG_FCS if fcs else 0
    return struct.pack("<BBHIB", 0, 0, 9, RADIOTAP_PRESENT_FLAGS, flags)


def write_capture(frames: Iterable[ParsedFrame], dest: Union[str, PathLike, BinaryIO],
                  link_type: int = LINKTYPE_IEEE802_11, fcs: bool = False,
                  snaplen: int = 65535) -> int:
    """Write frames as a little-endian classic pcap; returns the record count.

    With ``fcs`` each frame gets a trailing CRC-32. On link type 127 the
    radiotap Flags field advertises it; on 105 readers must be told.
    """
    if link_type not in (LINKTYPE_IEEE802_11, LINKTYPE_IEEE802_11_RADIOTAP):
        raise ValueError(f"link type must be 105 or 127, got {link_type}")
    prefix = radiotap_header(fcs) if link_type == LINKTYPE_IEEE802_11_RADIOTAP else b""

    if hasattr(dest, "write"):
        return _write_records(frames, dest, link_type, prefix, fcs, snaplen)
    with open(dest, "wb") as fh:
        return _write_records(frames, fh, link_type, prefix, fcs, snaplen)


def _write_records(frames, fh, link_type, prefix, fcs, snaplen) -> int:
    fh.write(struct.pack("<IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, snaplen, link_type))
    last = None
    written = 0
    for frame in frames:
        if last is not None and frame.timestamp_us < last:
            raise ValueError("frames must be in time order")
        last = frame.timestamp_us
        data = encode_frame(frame)
        if fcs:
            data += struct.pack("<I", zlib.crc32(data))
        record = prefix + data
        sec, usec = divmod(frame.timestamp_us, 1_000_000)
        fh.write(struct.pack("<IIII", sec, usec, len(record), len(record)))
        fh.write(record)
        written += 1
    return written


# ---------------------------------------------------------------------------
# scenario text format

def _parse_time(value: str, line: int) -> int:
    try:
        return round(float(value) * 1_000_000)
    except ValueError:
        pass
    try:
        return round(datetime.fromisoformat(value).timestamp() * 1_000_000)
    except ValueError:
        raise InvalidScenario(f"cannot parse time {value!r}", line) from None


def _kv(tokens: list[str], line: int, allowed: set[str]) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise InvalidScenario(f"expected key=value, got {tok!r}", line)
        if key not in allowed:
            raise InvalidScenario(f"unknown key {key!r}", line)
        out[key] = value
    return out


def _int(kv: dict, key: str, line: int, default=None) -> int:
    if key not in kv:
        if default is None:
            raise InvalidScenario(f"missing {key}=", line)
        return default
    try:
        return int(kv[key], 0)
    except ValueError:
        raise InvalidScenario(f"{key} must be an integer, got {kv[key]!r}", line) from None


def _mac_arg(value: str, line: int) -> MacAddress:
    try:
        return MacAddress.parse(value)
    except ValueError as exc:
        raise InvalidScenario(str(exc), line) from None


def _ies_arg(value: str, line: int) -> tuple[InformationElement, ...]:
    ies = []
    for item in filter(None, value.split(",")):
        tag, sep, hexval = item.partition(":")
        try:
            ies.append(InformationElement(int(tag, 16), bytes.fromhex(hexval)))
        except ValueError:
            raise InvalidScenario(f"bad IE {item!r}; expected hextag:hexbytes", line) from None
    return tuple(ies)


def parse_scenario(text: str) -> SynthScenario:
    """Parse the line-oriented scenario format (see README)."""
    lines = text.splitlines()
    header_seen = False
    fields = {"start_us": 0, "duration_us": 60_000_000, "seed": 0}
    aps, clients, probers = [], [], []

    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, *rest = line.split()
        if not header_seen:
            if keyword != SCENARIO_HEADER or rest != [str(SCENARIO_VERSION)]:
                raise InvalidScenario(
                    f"first line must be '{SCENARIO_HEADER} {SCENARIO_VERSION}'", lineno)
            header_seen = True
            continue

        if keyword in ("start", "duration", "seed"):
            if len(rest) != 1:
                raise InvalidScenario(f"{keyword} takes one value", lineno)
            if keyword == "start":
                fields["start_us"] = _parse_time(rest[0], lineno)
            elif keyword == "duration":
                try:
                    fields["duration_us"] = round(float(rest[0]) * 1_000_000)
                except ValueError:
                    raise InvalidScenario(f"bad duration {rest[0]!r}", lineno) from None
            else:
                fields["seed"] = _int({"seed": rest[0]}, "seed", lineno)
        elif keyword == "ap":
            if not rest:
                raise InvalidScenario("ap needs an address", lineno)
            kv = _kv(rest[1:], lineno, {"beacons", "ssid", "channel"})
            aps.append(ApSpec(_mac_arg(rest[0], lineno), _int(kv, "beacons", lineno),
                              kv.get("ssid", "crowdcount").encode(),
                              _int(kv, "channel", lineno, 6)))
        elif keyword == "client":
            if not rest:
                raise InvalidScenario("client needs an address", lineno)
            kv = _kv(rest[1:], lineno, {"ap", "frames"})
            if "ap" not in kv:
                raise InvalidScenario("missing ap=", lineno)
            clients.append(ClientSpec(_mac_arg(rest[0], lineno), _mac_arg(kv["ap"], lineno),
                                      _int(kv, "frames", lineno)))
        elif keyword == "prober":
            kv = _kv(rest, lineno, {"mac", "probes", "seq", "ies", "ssids", "channels"})
            mac_value = kv.get("mac", "random")
            mac = None if mac_value == "random" else _mac_arg(mac_value, lineno)
            ssids = tuple(s.encode() for s in kv.get("ssids", "").split(","))
            try:
                channels = tuple(int(c) for c in kv.get("channels", "1").split(",") if c)
            except ValueError:
                raise InvalidScenario(f"bad channels {kv['channels']!r}", lineno) from None
            probers.append(ProberSpec(_ies_arg(kv.get("ies", ""), lineno),
                                      _int(kv, "probes", lineno), mac,
                                      _int(kv, "seq", lineno, 0), ssids, channels))
        else:
            raise InvalidScenario(f"unknown directive {keyword!r}", lineno)
        try:
            _partial = SynthScenario(tuple(aps), tuple(clients), tuple(probers), **fields)
            _partial.validate()
        except InvalidScenario as exc:
            raise InvalidScenario(str(exc), lineno) from None

    if not header_seen:
        raise InvalidScenario(f"empty scenario; expected '{SCENARIO_HEADER} {SCENARIO_VERSION}'", 1)
    return SynthScenario(tuple(aps), tuple(clients), tuple(probers), **fields)


def load_scenario(source: Union[str, PathLike]) -> SynthScenario:
    """Load a scenario file, or a bundled one by name (e.g. ``paper-440``)."""
    if str(source) in BUNDLED_SCENARIOS and not Path(source).exists():
        text = resources.files("crowdcount").joinpath(
            "data", f"{source}.scenario").read_text()
    else:
        text = Path(source).read_text()
    return parse_scenario(text)
