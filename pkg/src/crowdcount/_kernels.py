"""Inner loops for sequence-number clustering and the trial simulator.

Each kernel exists twice: a numba ``@njit`` version and a vectorised numpy
version. The numba one is used when numba imports and the environment
variable ``CROWDCOUNT_DISABLE_NUMBA`` is unset or ``0``; both take and
return the same arrays so either can stand in for the other.
"""

import os

import numpy as np

SEQ_SPACE = 4096
_INSERTION_SORT_MAX = 64


def _numba_wanted() -> bool:
    return os.environ.get("CROWDCOUNT_DISABLE_NUMBA", "0").lower() in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# numpy implementations

def _np_count_gaps_sorted(values, threshold):
    """Clusters in an ascending 1-D array: one plus the gaps >= threshold."""
    if values.shape[0] == 0:
        return 0
    return int(np.count_nonzero(np.diff(values) >= threshold)) + 1


def _np_batch_cluster_counts(seqs, threshold):
    """Cluster count for every row of a 2-D (trials, points) array.

    Duplicates give a zero gap, which never splits when threshold >= 1, so
    no explicit dedup is needed.
    """
    if seqs.shape[1] == 0:
        return np.zeros(seqs.shape[0], dtype=np.int64)
    ordered = np.sort(seqs, axis=1)
    return np.count_nonzero(np.diff(ordered, axis=1) >= threshold, axis=1).astype(np.int64) + 1


def _np_device_seqnums(starts, increments, seq_space):
    """Expand per-device starts (T, X) and increments (T, X, Y-1) to (T, X*Y).

    Each device's numbers are start, start+inc1, ... reduced mod seq_space;
    since every increment is below seq_space this equals subtracting
    seq_space once whenever a step overflows.
    """
    steps = np.concatenate([starts[:, :, None], increments], axis=2)
    seqs = np.cumsum(steps, axis=2) % seq_space
    return seqs.reshape(seqs.shape[0], -1)


# ---------------------------------------------------------------------------
# numba implementations

_HAVE_NUMBA = False
if _numba_wanted():
    try:
        from numba import njit
        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        pass

if _HAVE_NUMBA:
    @njit(cache=True)
    def _nb_count_gaps_sorted(values, threshold):
        n = values.shape[0]
        if n == 0:
            return 0
        clusters = 1
        for i in range(1, n):
            if values[i] - values[i - 1] >= threshold:
                clusters += 1
        return clusters

    @njit(cache=True)
    def _nb_batch_cluster_counts(seqs, threshold):
        trials, width = seqs.shape
        out = np.zeros(trials, dtype=np.int64)
        if width == 0:
            return out
        row = np.empty(width, dtype=seqs.dtype)
        for t in range(trials):
            if width <= _INSERTION_SORT_MAX:
                # insertion sort: rows are short and numba's sort has high per-call cost
                for j in range(width):
                    value = seqs[t, j]
                    k = j
                    while k > 0 and row[k - 1] > value:
                        row[k] = row[k - 1]
                        k -= 1
                    row[k] = value
            else:
                for j in range(width):
                    row[j] = seqs[t, j]
                row.sort()
            clusters = 1
            for j in range(1, width):
                if row[j] - row[j - 1] >= threshold:
                    clusters += 1
            out[t] = clusters
        return out

    @njit(cache=True)
    def _nb_device_seqnums(starts, increments, seq_space):
        trials, devices = starts.shape
        per_device = increments.shape[2] + 1
        out = np.empty((trials, devices * per_device), dtype=np.int64)
        for t in range(trials):
            for d in range(devices):
                value = starts[t, d]
                base = d * per_device
                out[t, base] = value
                for k in range(per_device - 1):
                    value += increments[t, d, k]
                    if value >= seq_space:
                        value -= seq_space
                    out[t, base + k + 1] = value
        return out

    count_gaps_sorted = _nb_count_gaps_sorted
    batch_cluster_counts = _nb_batch_cluster_counts
    device_seqnums = _nb_device_seqnums
    BACKEND = "numba"
else:
    count_gaps_sorted = _np_count_gaps_sorted
    batch_cluster_counts = _np_batch_cluster_counts
    device_seqnums = _np_device_seqnums
    BACKEND = "numpy"

NUMPY_KERNELS = {
    "count_gaps_sorted": _np_count_gaps_sorted,
    "batch_cluster_counts": _np_batch_cluster_counts,
    "device_seqnums": _np_device_seqnums,
}

NUMBA_KERNELS = {
    "count_gaps_sorted": _nb_count_gaps_sorted,
    "batch_cluster_counts": _nb_batch_cluster_counts,
    "device_seqnums": _nb_device_seqnums,
} if _HAVE_NUMBA else {}
