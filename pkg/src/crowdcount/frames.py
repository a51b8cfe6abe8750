"""Domain types for decoded 802.11 frames and probe-request fingerprints."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Optional

# SSID and DSSS parameter set
DEFAULT_IE_FILTER = frozenset({0, 3})

FINGERPRINT_DIGEST_SIZE = 16


@dataclass(frozen=True, order=True)
class MacAddress:
    octets: bytes

    def __post_init__(self):
        if not isinstance(self.octets, bytes):
            object.__setattr__(self, "octets", bytes(self.octets))
        if len(self.octets) != 6:
            raise ValueError(f"MAC address needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        """Parse ``aa:bb:cc:dd:ee:ff`` (``-`` separators also accepted)."""
        parts = text.strip().replace("-", ":").split(":")
        if len(parts) != 6 or not all(len(p) == 2 for p in parts):
            raise ValueError(f"not a MAC address: {text!r}")
        try:
            return cls(bytes(int(p, 16) for p in parts))
        except ValueError:
            raise ValueError(f"not a MAC address: {text!r}") from None

    @property
    def is_multicast(self) -> bool:
        return bool(self.octets[0] & 0x01)

    @property
    def is_locally_administered(self) -> bool:
        return bool(self.octets[0] & 0x02)

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddress('{self}')"


BROADCAST = MacAddress(b"\xff" * 6)


def is_multicast(addr: MacAddress) -> bool:
    return addr.is_multicast


def is_locally_administered(addr: MacAddress) -> bool:
    return addr.is_locally_administered


class FrameKind(enum.Enum):
    BEACON = "beacon"
    PROBE_REQUEST = "probe_request"
    DATA = "data"
    OTHER = "other"

    @classmethod
    def from_type_subtype(cls, ftype: int, subtype: int) -> "FrameKind":
        if ftype == 0 and subtype == 4:
            return cls.PROBE_REQUEST
        if ftype == 0 and subtype == 8:
            return cls.BEACON
        if ftype == 2:
            return cls.DATA
        return cls.OTHER


@dataclass(frozen=True)
class InformationElement:
    tag: int
    value: bytes = b""

    def __post_init__(self):
        if not isinstance(self.value, bytes):
            object.__setattr__(self, "value", bytes(self.value))
        if not 0 <= self.tag <= 255:
            raise ValueError(f"IE tag out of range: {self.tag}")
        if len(self.value) > 255:
            raise ValueError(f"IE value too long: {len(self.value)} octets")

    @property
    def length(self) -> int:
        return len(self.value)

    def encode(self) -> bytes:
        return bytes((self.tag, len(self.value))) + self.value


@dataclass(frozen=True)
class FrameBodyFingerprint:
    """Canonical TLV bytes of the surviving IEs plus a 128-bit digest of them.

    Equality and hashing go through ``canonical_bytes``; ``digest`` is what
    reports print.
    """

    canonical_bytes: bytes
    digest: bytes = field(compare=False)

    @classmethod
    def from_canonical(cls, canonical: bytes) -> "FrameBodyFingerprint":
        digest = hashlib.blake2b(canonical, digest_size=FINGERPRINT_DIGEST_SIZE).digest()
        return cls(canonical, digest)

    @property
    def hexdigest(self) -> str:
        return self.digest.hex()

    def __str__(self) -> str:
        return self.hexdigest


def fingerprint_of(ies: Iterable[InformationElement],
                   ie_filter: Iterable[int] = DEFAULT_IE_FILTER) -> FrameBodyFingerprint:
    """Fingerprint a probe-request body.

    Every IE whose tag is in ``ie_filter`` is dropped; the rest are kept in
    their original order, duplicates included, and concatenated as
    tag/length/value.
    """
    drop = frozenset(ie_filter)
    canonical = b"".join(ie.encode() for ie in ies if ie.tag not in drop)
    return FrameBodyFingerprint.from_canonical(canonical)


@dataclass(frozen=True)
class ParsedFrame:
    kind: FrameKind
    addr1: Optional[MacAddress]
    addr2: Optional[MacAddress]
    seq_num: Optional[int]
    ies: tuple[InformationElement, ...] = ()
    # capture time in integer microseconds since the epoch
    timestamp_us: int = 0
    fragment: int = 0

    def __post_init__(self):
        if not isinstance(self.ies, tuple):
            object.__setattr__(self, "ies", tuple(self.ies))
        if self.seq_num is not None and not 0 <= self.seq_num <= 4095:
            raise ValueError(f"sequence number out of range: {self.seq_num}")
        if not 0 <= self.fragment <= 15:
            raise ValueError(f"fragment number out of range: {self.fragment}")
        if self.ies and self.kind not in (FrameKind.PROBE_REQUEST, FrameKind.BEACON):
            raise ValueError(f"{self.kind.value} frames carry no IEs")

    @property
    def timestamp(self) -> float:
        return self.timestamp_us / 1e6

    @property
    def source(self) -> Optional[MacAddress]:
        return self.addr2
