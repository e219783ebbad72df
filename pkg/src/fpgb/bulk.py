"""Deterministic data-parallel primitives: scan, radix sort, unique, join, compact.

Every primitive is externally pure and schedule-independent: the same input
produces byte-identical output for any worker-lane count and any lane
processing order.  Work is decomposed exactly as a data-parallel runtime
would decompose it (per-lane counting, prefix-summed write plans, disjoint
scatter regions), so running the lanes in shuffled order is a genuine
witness of race-freedom, not a simulation detail.

Keys are rows of fixed-width uint64 word vectors compared lexicographically
most-significant word first.  Sorting is a stable byte-wise radix sort with
8 * n_words passes regardless of data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingKeyError, PreconditionError
from .monomials import key_cmp_rows

MERGE_GRAIN = 4096
_RADIX_BITS = 8


@dataclass(frozen=True)
class ExecPolicy:
    """Worker-lane configuration for the primitives.

    ``lanes`` is the number of contiguous work partitions; ``lane_order_seed``
    shuffles the order in which lanes are processed (outputs must not
    depend on it).
    """

    lanes: int = 1
    lane_order_seed: int | None = None


DEFAULT_POLICY = ExecPolicy()


def _lane_bounds(n: int, lanes: int):
    lanes = max(1, lanes)
    step = -(-n // lanes) if n else 0
    bounds = []
    for c in range(lanes):
        lo = min(n, c * step)
        hi = min(n, lo + step)
        bounds.append((lo, hi))
    return bounds


def _lane_order(policy: ExecPolicy, n_lanes: int):
    if policy.lane_order_seed is None:
        return range(n_lanes)
    return np.random.default_rng(policy.lane_order_seed).permutation(n_lanes)


def radix_pass_count(n_words: int) -> int:
    return 8 * n_words


def exclusive_scan(lengths, policy: ExecPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Exclusive prefix sum; result has len+1 entries, last is the total."""
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.size and lengths.min() < 0:
        raise PreconditionError("lengths must be non-negative")
    if int(np.sum(lengths, dtype=object) if lengths.size else 0) >= 1 << 63:
        raise PreconditionError("scan total overflows 64 bits")
    out = np.zeros(len(lengths) + 1, dtype=np.int64)
    bounds = _lane_bounds(len(lengths), policy.lanes)
    lane_totals = np.array([int(lengths[lo:hi].sum()) for lo, hi in bounds], dtype=np.int64)
    lane_base = np.concatenate([[0], np.cumsum(lane_totals)[:-1]]) if bounds else np.zeros(0)
    for c in _lane_order(policy, len(bounds)):
        lo, hi = bounds[c]
        out[lo + 1 : hi + 1] = lane_base[c] + np.cumsum(lengths[lo:hi])
    return out


def _digit(keys: np.ndarray, word: int, byte: int) -> np.ndarray:
    return ((keys[:, word] >> np.uint64(8 * byte)) & np.uint64(0xFF)).astype(np.int64)


def radix_sort(keys: np.ndarray, policy: ExecPolicy = DEFAULT_POLICY):
    """Stable ascending sort of multi-word keys.

    Returns (sorted_keys, perm) where perm is the stable permutation taking
    input positions to sorted order; apply it to any payload arrays.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    if keys.ndim != 2:
        raise PreconditionError("keys must be a 2-D word matrix")
    n, n_words = keys.shape
    perm = np.arange(n, dtype=np.int64)
    if n <= 1:
        return keys.copy(), perm
    bounds = _lane_bounds(n, policy.lanes)
    n_lanes = len(bounds)
    # least-significant byte first over all words; each pass is a stable
    # counting sort with per-lane histograms and disjoint scatter regions
    for word in range(n_words - 1, -1, -1):
        for byte in range(8):
            dig = _digit(keys[perm], word, byte)
            counts = np.zeros((n_lanes, 256), dtype=np.int64)
            for c in range(n_lanes):
                lo, hi = bounds[c]
                counts[c] = np.bincount(dig[lo:hi], minlength=256)
            totals = counts.sum(axis=0)
            digit_base = np.concatenate([[0], np.cumsum(totals)[:-1]])
            lane_prefix = np.cumsum(counts, axis=0) - counts
            start = digit_base[None, :] + lane_prefix
            new_perm = np.empty_like(perm)
            for c in _lane_order(policy, n_lanes):
                lo, hi = bounds[c]
                d = dig[lo:hi]
                order = np.argsort(d, kind="stable")
                d_sorted = d[order]
                chunk_base = np.concatenate([[0], np.cumsum(np.bincount(d, minlength=256))[:-1]])
                within = np.arange(hi - lo, dtype=np.int64) - chunk_base[d_sorted]
                new_perm[start[c, d_sorted] + within] = perm[lo:hi][order]
            perm = new_perm
    return keys[perm], perm


def is_sorted_ascending(keys: np.ndarray, strict: bool = False) -> bool:
    keys = np.asarray(keys, dtype=np.uint64)
    if len(keys) <= 1:
        return True
    cmp = key_cmp_rows(keys[:-1], keys[1:])
    return bool((cmp < 0).all()) if strict else bool((cmp <= 0).all())


def unique_sorted(keys: np.ndarray, policy: ExecPolicy = DEFAULT_POLICY, check: bool = True):
    """Deduplicate an ascending key stream.

    Returns (uniques, first_index) with uniques strictly ascending and
    first_index[j] the position of the first occurrence in the input.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    if check and not is_sorted_ascending(keys):
        raise PreconditionError("unique_sorted requires ascending keys")
    if len(keys) == 0:
        return keys.copy(), np.zeros(0, dtype=np.int64)
    new = np.empty(len(keys), dtype=bool)
    new[0] = True
    new[1:] = (keys[1:] != keys[:-1]).any(axis=1)
    first_index = np.flatnonzero(new).astype(np.int64)
    return stream_compact(keys, new, policy), first_index


def stream_compact(items: np.ndarray, keep: np.ndarray, policy: ExecPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Keep flagged items in their original relative order."""
    items = np.asarray(items)
    keep = np.asarray(keep, dtype=bool)
    if len(items) != len(keep):
        raise PreconditionError("items and mask must have equal length")
    bounds = _lane_bounds(len(items), policy.lanes)
    lane_counts = np.array([int(keep[lo:hi].sum()) for lo, hi in bounds], dtype=np.int64)
    lane_base = np.concatenate([[0], np.cumsum(lane_counts)[:-1]])
    out = np.empty((int(lane_counts.sum()),) + items.shape[1:], dtype=items.dtype)
    for c in _lane_order(policy, len(bounds)):
        lo, hi = bounds[c]
        out[lane_base[c] : lane_base[c] + lane_counts[c]] = items[lo:hi][keep[lo:hi]]
    return out


def lower_bound(sorted_keys: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Vectorized first-position binary search over multi-word keys."""
    n = len(sorted_keys)
    lo = np.zeros(len(queries), dtype=np.int64)
    hi = np.full(len(queries), n, dtype=np.int64)
    while True:
        open_mask = lo < hi
        if not open_mask.any():
            break
        mid = (lo + hi) >> 1
        cmp = key_cmp_rows(sorted_keys[mid[open_mask]], queries[open_mask])
        less = np.zeros(len(queries), dtype=bool)
        less[np.flatnonzero(open_mask)[cmp < 0]] = True
        lo = np.where(open_mask & less, mid + 1, lo)
        hi = np.where(open_mask & ~less, mid, hi)
    return lo


def _merge_path_splits(seg: np.ndarray, dic: np.ndarray, grain: int):
    """Diagonal splits of the (segment x dict) merge grid at fixed grain."""
    s, d = len(seg), len(dic)
    diags = list(range(0, s + d, grain)) + [s + d]
    splits = []
    for diag in diags:
        lo, hi = max(0, diag - d), min(diag, s)
        # find smallest i with seg[i] > dic[diag - i - 1] (dict side consumed first)
        while lo < hi:
            mid = (lo + hi) // 2
            j = diag - mid - 1
            if j >= d or (j >= 0 and key_cmp_rows(seg[mid : mid + 1], dic[j : j + 1])[0] > 0):
                hi = mid
            else:
                lo = mid + 1
        splits.append(lo)
    # monotone tiling of [0, len(seg)] even for per-segment-sorted streams
    return np.maximum.accumulate(np.array(splits, dtype=np.int64))


def merge_join_index(
    segment: np.ndarray,
    dict_keys: np.ndarray,
    policy: ExecPolicy = DEFAULT_POLICY,
    check: bool = True,
) -> np.ndarray:
    """Position of every segment key inside a strictly ascending dictionary.

    The merge grid is partitioned along diagonals of fixed grain so lanes
    receive balanced contiguous slices; within a slice positions come from
    a vectorized segmented binary search.  Absent keys indicate an upstream
    closure defect and raise MissingKeyError.
    """
    segment = np.asarray(segment, dtype=np.uint64)
    dict_keys = np.asarray(dict_keys, dtype=np.uint64)
    if check and not is_sorted_ascending(segment):
        raise PreconditionError("segment keys must be ascending")
    if check and not is_sorted_ascending(dict_keys, strict=True):
        raise PreconditionError("dictionary keys must be strictly ascending")
    if len(segment) == 0:
        return np.zeros(0, dtype=np.int64)
    out = np.empty(len(segment), dtype=np.int64)
    splits = _merge_path_splits(segment, dict_keys, MERGE_GRAIN)
    parts = [(splits[k], splits[k + 1]) for k in range(len(splits) - 1)]
    for k in _lane_order(policy, len(parts)):
        lo, hi = parts[k]
        if lo < hi:
            out[lo:hi] = lower_bound(dict_keys, segment[lo:hi])
    bad = (out >= len(dict_keys)) | (
        (dict_keys[np.minimum(out, len(dict_keys) - 1)] != segment).any(axis=1)
    )
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise MissingKeyError(f"key {tuple(segment[i].tolist())} absent from dictionary")
    return out
