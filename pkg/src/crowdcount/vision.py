"""Count devices by splitting MACs into APs, connected clients and probers.

Connected clients are counted by address; clients that only probe are
counted by the number of distinct probe-request fingerprints, which is what
collapses a randomizing device back to one.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, TypeVar

from .frames import (DEFAULT_IE_FILTER, FrameBodyFingerprint, FrameKind, MacAddress,
                     ParsedFrame, fingerprint_of)

# frames may arrive this much (microseconds) behind the newest one seen
REORDER_TOLERANCE_US = 1_000_000

T = TypeVar("T")


class NonPositiveWindow(ValueError):
    pass


class OutOfOrderFrames(ValueError):
    pass


@dataclass(frozen=True)
class MacClassification:
    ap_set: frozenset[MacAddress] = frozenset()
    connected_set: frozenset[MacAddress] = frozenset()
    probing_set: frozenset[MacAddress] = frozenset()


@dataclass(frozen=True)
class VisionCount:
    connected_devices: int
    unconnected_devices: int
    total: int
    fingerprint_index: dict[FrameBodyFingerprint, frozenset[MacAddress]] = field(
        default_factory=dict, compare=False)
    classification: MacClassification = field(default_factory=MacClassification,
                                              compare=False)
    # fingerprints also seen from a connected MAC: possibly counted twice
    shared_fingerprints: frozenset[FrameBodyFingerprint] = field(
        default_factory=frozenset, compare=False)


def _unicast(addr: Optional[MacAddress]) -> bool:
    return addr is not None and not addr.is_multicast


def classify_macs(frames: Iterable[ParsedFrame]) -> MacClassification:
    aps: set[MacAddress] = set()
    data_macs: set[MacAddress] = set()
    probe_macs: set[MacAddress] = set()
    for frame in frames:
        # later fragments repeat the first fragment's addresses
        if frame.fragment:
            continue
        if frame.kind is FrameKind.BEACON:
            if _unicast(frame.addr2):
                aps.add(frame.addr2)
        elif frame.kind is FrameKind.DATA:
            for addr in (frame.addr1, frame.addr2):
                if _unicast(addr):
                    data_macs.add(addr)
        elif frame.kind is FrameKind.PROBE_REQUEST:
            if _unicast(frame.addr2):
                probe_macs.add(frame.addr2)

    connected = data_macs - aps
    probing = probe_macs - connected - aps
    return MacClassification(frozenset(aps), frozenset(connected), frozenset(probing))


def group_probes(frames: Iterable[ParsedFrame], macs: frozenset[MacAddress],
                 ie_filter: Iterable[int] = DEFAULT_IE_FILTER
                 ) -> dict[FrameBodyFingerprint, list[ParsedFrame]]:
    """Bucket the probe requests sent from ``macs`` by fingerprint."""
    ie_filter = frozenset(ie_filter)
    groups: dict[FrameBodyFingerprint, list[ParsedFrame]] = defaultdict(list)
    for frame in frames:
        if (frame.kind is FrameKind.PROBE_REQUEST and not frame.fragment
                and frame.addr2 in macs):
            groups[fingerprint_of(frame.ies, ie_filter)].append(frame)
    return dict(groups)


def vision_estimate(frames: Iterable[ParsedFrame],
                    ie_filter: Iterable[int] = DEFAULT_IE_FILTER) -> VisionCount:
    frames = list(frames)
    ie_filter = frozenset(ie_filter)
    classes = classify_macs(frames)
    groups = group_probes(frames, classes.probing_set, ie_filter)
    index = {fp: frozenset(f.addr2 for f in group) for fp, group in groups.items()}

    shared = frozenset(group_probes(frames, classes.connected_set, ie_filter)) & index.keys()

    connected = len(classes.connected_set)
    unconnected = len(index)
    return VisionCount(connected, unconnected, connected + unconnected, index, classes,
                       frozenset(shared))


def iter_windows(frames: Iterable[ParsedFrame], window: float
                 ) -> Iterator[tuple[int, list[ParsedFrame]]]:
    """Group a time-ordered frame stream into tumbling windows.

    Yields ``(window_start_us, frames)`` with ``window_start_us`` a multiple
    of the window length, including empty windows between the first and last
    frame. Frames up to one second out of order are accepted and sorted into
    their window; anything later raises OutOfOrderFrames.
    """
    if not window > 0:
        raise NonPositiveWindow(f"window must be positive, got {window}")
    width = round(window * 1_000_000)
    if width <= 0:
        raise NonPositiveWindow(f"window shorter than a microsecond: {window}")

    pending: dict[int, list[ParsedFrame]] = {}
    next_index: Optional[int] = None
    newest = None

    def flush(upto: int):
        nonlocal next_index
        while next_index < upto:
            bucket = pending.pop(next_index, [])
            bucket.sort(key=lambda f: f.timestamp_us)
            yield next_index * width, bucket
            next_index += 1

    for frame in frames:
        ts = frame.timestamp_us
        if newest is not None and ts < newest - REORDER_TOLERANCE_US:
            raise OutOfOrderFrames(
                f"frame at {ts} us arrived after one at {newest} us")
        index = ts // width
        if next_index is None:
            next_index = index
        elif index < next_index:
            raise OutOfOrderFrames(f"frame at {ts} us belongs to an already emitted window")
        pending.setdefault(index, []).append(frame)
        newest = ts if newest is None else max(newest, ts)
        # windows ending before newest - tolerance can no longer gain frames
        yield from flush((newest - REORDER_TOLERANCE_US) // width)

    if next_index is not None:
        yield from flush(max(pending) + 1 if pending else next_index)


def window_estimates(frames: Iterable[ParsedFrame], window: float = 60.0,
                     estimator: Callable[[list[ParsedFrame]], T] = vision_estimate
                     ) -> Iterator[tuple[int, T]]:
    for start, bucket in iter_windows(frames, window):
        yield start, estimator(bucket)
