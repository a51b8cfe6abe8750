"""Split each probe fingerprint into devices by clustering sequence numbers.

Probing-only stations send little besides probe requests, so one station's
sequence numbers sit close together. On a line, single-linkage clustering
with a cut-off reduces to sorting and breaking at every gap of at least the
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import _kernels
from .frames import DEFAULT_IE_FILTER, FrameBodyFingerprint, ParsedFrame
from .vision import classify_macs, group_probes

SEQ_SPACE = _kernels.SEQ_SPACE
DEFAULT_THRESHOLD = 50


class ValueOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class ClusterConfig:
    threshold: int = DEFAULT_THRESHOLD
    seq_space: int = SEQ_SPACE

    def __post_init__(self):
        if not 0 < self.threshold <= self.seq_space:
            raise ValueError(
                f"threshold must be in (0, {self.seq_space}], got {self.threshold}")


@dataclass(frozen=True)
class TrueSightCount:
    connected_devices: int
    unconnected_devices: int
    total: int
    per_fingerprint_clusters: dict[FrameBodyFingerprint, int] = field(
        default_factory=dict, compare=False)


def cluster_count(seq_nums: Iterable[int], config: ClusterConfig = ClusterConfig()) -> int:
    """Number of single-linkage clusters among the sequence numbers.

    Distance is plain absolute difference, no wraparound. Two values join
    the same cluster when their gap is below ``config.threshold``.
    """
    values = np.unique(np.fromiter(seq_nums, dtype=np.int64))
    if values.size and (values[0] < 0 or values[-1] >= config.seq_space):
        raise ValueOutOfRange(
            f"sequence numbers must lie in [0, {config.seq_space}), "
            f"got {values[0]}..{values[-1]}")
    return int(_kernels.count_gaps_sorted(values, config.threshold))


def truesight_estimate(frames: Iterable[ParsedFrame],
                       config: ClusterConfig = ClusterConfig(),
                       ie_filter: Iterable[int] = DEFAULT_IE_FILTER) -> TrueSightCount:
    frames = list(frames)
    classes = classify_macs(frames)
    groups = group_probes(frames, classes.probing_set, ie_filter)
    clusters = {
        fp: cluster_count((f.seq_num for f in group if f.seq_num is not None), config)
        for fp, group in groups.items()
    }
    connected = len(classes.connected_set)
    unconnected = sum(clusters.values())
    return TrueSightCount(connected, unconnected, connected + unconnected, clusters)
