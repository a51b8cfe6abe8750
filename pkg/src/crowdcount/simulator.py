"""Monte Carlo estimate of how well sequence-number clustering counts devices.

Each trial places X devices that each send Y probe requests: a uniform start
in [0, 4095] followed by Y-1 uniform increments in [1, 49], wrapping at
4096. All X*Y numbers are pooled and clustered; the cluster count is the
trial's estimate of X.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import _kernels
from .truesight import DEFAULT_THRESHOLD, SEQ_SPACE, ClusterConfig, cluster_count

DEFAULT_SEED = 20201019
MAX_INCREMENT = 49

# Observed counts n for each estimate x at N=10,000 trials.
# published "table2" histograms: X fixed at 5, Y = 1..6.
PUBLISHED_TABLE2 = {
    1: {1: 0, 2: 4, 3: 152, 4: 2124, 5: 7720, 6: 0},
    2: {1: 0, 2: 13, 3: 332, 4: 2785, 5: 6666, 6: 204},
    3: {1: 2, 2: 29, 3: 546, 4: 3246, 5: 5824, 6: 353},
    4: {1: 1, 2: 66, 3: 785, 4: 3704, 5: 4986, 6: 458},
    5: {1: 2, 2: 102, 3: 1066, 4: 3922, 5: 4352, 6: 556},
    6: {1: 4, 2: 141, 3: 1334, 4: 4089, 5: 3857, 6: 575},
}
# published "table3" histograms: Y fixed at 2, X = 1..8.
PUBLISHED_TABLE3 = {
    1: {1: 9940, 2: 60},
    2: {1: 358, 2: 9523, 3: 119},
    3: {1: 25, 2: 1023, 3: 8786, 4: 166},
    4: {1: 2, 2: 121, 3: 1912, 4: 7781, 5: 184},
    5: {1: 0, 2: 13, 3: 334, 4: 2771, 5: 6680, 6: 202},
    6: {1: 0, 2: 4, 3: 59, 4: 766, 5: 3500, 6: 5470, 7: 201},
    7: {1: 0, 2: 0, 3: 9, 4: 183, 5: 1312, 6: 3961, 7: 4337, 8: 198},
    8: {1: 0, 2: 0, 3: 1, 4: 52, 5: 457, 6: 1957, 7: 4115, 8: 3247, 9: 171},
}
PUBLISHED_TRIALS = 10_000


@dataclass(frozen=True)
class TrialConfig:
    X: int
    Y: int
    N: int = PUBLISHED_TRIALS
    threshold: int = DEFAULT_THRESHOLD
    seed: int = DEFAULT_SEED
    max_increment: int = MAX_INCREMENT

    def __post_init__(self):
        for name in ("X", "Y", "N"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 1 <= self.max_increment < SEQ_SPACE:
            raise ValueError(f"max_increment must be in [1, {SEQ_SPACE - 1}]")
        ClusterConfig(self.threshold)

    @property
    def max_estimate(self) -> int:
        return max_clusters(self.X, self.threshold)


def max_clusters(devices: int, threshold: int = DEFAULT_THRESHOLD) -> int:
    """Upper bound on any trial's estimate: min(floor(4096/t) + 1, X + 1)."""
    return min(SEQ_SPACE // threshold + 1, devices + 1)


@dataclass(frozen=True)
class TrialHistogram:
    config: TrialConfig
    counts: dict[int, int] = field(default_factory=dict)

    @classmethod
    def from_estimates(cls, config: TrialConfig, estimates: Iterable[int]) -> "TrialHistogram":
        tally = Counter(int(e) for e in estimates)
        return cls(config, dict(sorted(tally.items())))

    @property
    def trials(self) -> int:
        return sum(self.counts.values())

    @property
    def correct(self) -> int:
        return self.counts.get(self.config.X, 0)

    @property
    def within_one(self) -> int:
        X = self.config.X
        return sum(n for x, n in self.counts.items() if abs(x - X) <= 1)

    @property
    def correct_rate(self) -> float:
        return self.correct / self.trials if self.trials else 0.0

    @property
    def within_one_rate(self) -> float:
        return self.within_one / self.trials if self.trials else 0.0

    def merge(self, other: "TrialHistogram") -> "TrialHistogram":
        if (other.config.X, other.config.Y, other.config.threshold) != (
                self.config.X, self.config.Y, self.config.threshold):
            raise ValueError("cannot merge histograms of different experiments")
        tally = Counter(self.counts)
        tally.update(other.counts)
        config = TrialConfig(self.config.X, self.config.Y, self.trials + other.trials,
                             self.config.threshold, self.config.seed,
                             self.config.max_increment)
        return TrialHistogram(config, dict(sorted(tally.items())))


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for trial ``index`` of an experiment seeded with ``seed``."""
    return np.random.default_rng([seed, index])


def gen_device_seqnums(Y: int, rng: np.random.Generator,
                       max_increment: int = MAX_INCREMENT) -> list[int]:
    """Sequence numbers of Y probe requests from one simulated device."""
    if Y < 1:
        raise ValueError(f"Y must be at least 1, got {Y}")
    value = int(rng.integers(0, SEQ_SPACE))
    seqs = [value]
    for inc in rng.integers(1, max_increment + 1, size=Y - 1):
        value += int(inc)
        if value >= SEQ_SPACE:
            value -= SEQ_SPACE
        seqs.append(value)
    return seqs


def _draw_trial(config: TrialConfig, rng: np.random.Generator):
    starts = rng.integers(0, SEQ_SPACE, size=config.X)
    increments = rng.integers(1, config.max_increment + 1, size=(config.X, config.Y - 1))
    return starts, increments


def trial_seqnums(config: TrialConfig, rng: np.random.Generator) -> np.ndarray:
    """The pooled X*Y sequence numbers of one trial, device by device."""
    starts, increments = _draw_trial(config, rng)
    return _kernels.device_seqnums(starts[None, :], increments[None, :, :], SEQ_SPACE)[0]


def run_trial(config: TrialConfig, rng: np.random.Generator) -> int:
    return cluster_count(trial_seqnums(config, rng).tolist(), ClusterConfig(config.threshold))


def run_monte_carlo(config: TrialConfig, start: int = 0,
                    stop: Optional[int] = None) -> TrialHistogram:
    """Run trials ``start``..``stop`` (default all N) and histogram the estimates.

    Trial ``i`` draws from ``trial_rng(config.seed, i)``, so any split of the
    index range into chunks merges back to the same histogram, and every
    trial can be replayed on its own with ``run_trial``.
    """
    stop = config.N if stop is None else stop
    count = stop - start
    starts = np.empty((count, config.X), dtype=np.int64)
    increments = np.empty((count, config.X, config.Y - 1), dtype=np.int64)
    for row, index in enumerate(range(start, stop)):
        starts[row], increments[row] = _draw_trial(config, trial_rng(config.seed, index))
    seqs = _kernels.device_seqnums(starts, increments, SEQ_SPACE)
    estimates = _kernels.batch_cluster_counts(seqs, config.threshold)
    tally = np.bincount(estimates)
    counts = {int(x): int(n) for x, n in enumerate(tally) if n}
    return TrialHistogram(config if count == config.N else
                          TrialConfig(config.X, config.Y, count, config.threshold,
                                      config.seed, config.max_increment), counts)


def table_configs(which: str, N: int = PUBLISHED_TRIALS, seed: int = DEFAULT_SEED,
                  threshold: int = DEFAULT_THRESHOLD) -> list[TrialConfig]:
    """Experiment rows of the published tables: "table2" (X=5, Y=1..6) or
    "table3" (X=1..8, Y=2)."""
    if which == "table2":
        return [TrialConfig(5, y, N, threshold, seed) for y in sorted(PUBLISHED_TABLE2)]
    if which == "table3":
        return [TrialConfig(x, 2, N, threshold, seed) for x in sorted(PUBLISHED_TABLE3)]
    raise ValueError(f"unknown table {which!r}; expected table2 or table3")


def published_counts(which: str, config: TrialConfig) -> dict[int, int]:
    if which == "table2":
        return PUBLISHED_TABLE2.get(config.Y, {}) if config.X == 5 else {}
    if which == "table3":
        return PUBLISHED_TABLE3.get(config.X, {}) if config.Y == 2 else {}
    raise ValueError(f"unknown table {which!r}")
