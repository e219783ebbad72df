"""Batch compilation: from selected reduction targets to a static sparse plan.

The compiler turns a batch specification (targets, candidate reducers, an
admissibility filter) into three outputs:

- a sorted monomial dictionary (the matrix column space),
- a deterministic row list of shifted reducers (t_i, g_{k_i}),
- a write-once sparse layout plan: row_ptr / col_ind / val / dict_keys /
  row_meta, from which the batch matrix materializes directly.

The pipeline is the canonical two-pass scheme: count row sizes, prefix-sum
the write plan, fill flat key/value streams, canonicalize the dictionary by
radix sort + unique, then join every row segment against the dictionary to
produce column indices.  Optionally the dictionary is closed under one-step
reductions: any dictionary monomial divisible by a basis leading monomial
gains a reducer row, iterated to a fixed point.

Everything is deterministic: row order is fixed by (role, provenance,
shift key, basis index), closure rows append in discovery-round order, and
all bulk steps are schedule-independent.  Compiling the same batch with any
worker-lane count yields byte-identical plans.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .bulk import (
    DEFAULT_POLICY,
    ExecPolicy,
    exclusive_scan,
    lower_bound,
    merge_join_index,
    radix_sort,
    unique_sorted,
    stream_compact,
)
from .errors import PropertyViolationError, SizeCapError, UncoverableTargetError
from .monomials import Ring, key_cmp_rows, key_pack_vec, key_unpack_vec, mon_div, mon_key_pack
from .polynomials import Poly, SoaPolySet

DICT_CAP = 10**6


class RowRole(enum.Enum):
    SPOLY_HALF = 0
    REDUCER = 1


class Closure(enum.Enum):
    SUPPORT_ONLY = "support_only"
    ONE_STEP_REDUCTION = "one_step_reduction"


@dataclass(frozen=True)
class Row:
    """One shifted reducer: shift monomial, basis index, origin bookkeeping."""

    shift: tuple
    basis_index: int
    role: RowRole
    provenance: int  # pair id for S-halves, discovery round for closure rows


@dataclass(frozen=True)
class PairTarget:
    """A critical-pair target: the lcm plus the pair it came from."""

    lcm: tuple
    pair_id: int
    fi: int
    gi: int


@dataclass
class BatchSpec:
    """Inputs to symbolic preprocessing: targets, reducer pool, admissibility."""

    targets: list
    candidates: tuple
    adm: object = None  # callable (shift, basis_index, role, provenance) -> bool


@dataclass
class PlanCounters:
    r: int = 0
    N: int = 0
    M: int = 0
    nnz: int = 0
    closure_rounds: int = 0
    keys_emitted: int = 0
    keys_generated_total: int = 0


@dataclass
class LayoutPlan:
    """Write-once sparse plan for one batch matrix.

    Columns are indexed against ``dict_keys`` stored in descending term
    order (column 0 is the greatest monomial), so column indices ascend
    within each row segment.
    """

    ring: Ring
    row_ptr: np.ndarray  # (r+1,) int64 exclusive prefix of row lengths
    col_ind: np.ndarray  # (M,) int64
    val: np.ndarray  # (M,) uint64, all nonzero
    dict_keys: np.ndarray  # (N, W) uint64, strictly descending
    row_meta: tuple  # Row per matrix row
    counters: PlanCounters = field(default_factory=PlanCounters)
    timings_ns: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.row_ptr) - 1

    @property
    def n_cols(self) -> int:
        return len(self.dict_keys)

    def validate(self):
        """Structural invariants; raises PropertyViolationError on any failure.

        Checks the race-freedom partition (row segments tile [0, M)), strict
        column ascent per segment, nonzero values, descending dictionary,
        and counter consistency.
        """
        c = self.counters
        ok = self.row_ptr[0] == 0 and self.row_ptr[-1] == len(self.col_ind) == len(self.val)
        if not ok:
            raise PropertyViolationError("row_ptr does not tile the value stream")
        seg_len = np.diff(self.row_ptr)
        if (seg_len < 0).any():
            raise PropertyViolationError("negative row segment length")
        if len(self.row_meta) != self.n_rows:
            raise PropertyViolationError("row_meta length mismatch")
        for i in range(self.n_rows):
            s, e = int(self.row_ptr[i]), int(self.row_ptr[i + 1])
            if e - s < 1:
                raise PropertyViolationError(f"empty row {i} (basis members are nonzero)")
            seg = self.col_ind[s:e]
            if (np.diff(seg) <= 0).any():
                raise PropertyViolationError(f"row {i} columns not strictly ascending")
            if seg[0] < 0 or seg[-1] >= self.n_cols:
                raise PropertyViolationError(f"row {i} column out of range")
        if len(self.val) and (self.val == 0).any():
            raise PropertyViolationError("zero value stored in plan")
        if len(self.dict_keys) > 1:
            if not (key_cmp_rows(self.dict_keys[:-1], self.dict_keys[1:]) == 1).all():
                raise PropertyViolationError("dictionary keys not strictly descending")
        if not (
            c.r == self.n_rows
            and c.N == self.n_cols
            and c.M == int(self.row_ptr[-1])
            and c.nnz == c.M
            and c.keys_emitted == c.M
            and c.keys_generated_total >= c.M
        ):
            raise PropertyViolationError(f"counters inconsistent: {c}")


def row_sort_key(row: Row, ring: Ring):
    return (row.role.value, row.provenance, mon_key_pack(row.shift, ring), row.basis_index)


def select_rows(spec: BatchSpec, basis: SoaPolySet) -> list:
    """Expand each pair target into its two shifted halves, then filter.

    The admissibility predicate runs as a bulk filter over the emitted row
    metadata; a target left with no surviving rows is an error.
    """
    ring = basis.ring
    n_basis = len(basis)
    rows = []
    owners = []
    for tgt in spec.targets:
        if not (0 <= tgt.fi < n_basis and 0 <= tgt.gi < n_basis):
            raise UncoverableTargetError(f"pair {tgt.pair_id} references unknown basis index")
        for k in (tgt.fi, tgt.gi):
            lead = tuple(int(x) for x in basis.exps[int(basis.offset[k])])
            rows.append(Row(mon_div(tgt.lcm, lead), k, RowRole.SPOLY_HALF, tgt.pair_id))
            owners.append(tgt.pair_id)
    if spec.adm is not None and rows:
        keep = np.array(
            [bool(spec.adm(r.shift, r.basis_index, r.role, r.provenance)) for r in rows],
            dtype=bool,
        )
        kept_idx = stream_compact(np.arange(len(rows), dtype=np.int64), keep)
        surviving = {owners[i] for i in kept_idx.tolist()}
        for tgt in spec.targets:
            if tgt.pair_id not in surviving:
                raise UncoverableTargetError(
                    f"target {tgt.lcm} of pair {tgt.pair_id} has no admissible rows"
                )
        rows = [rows[i] for i in kept_idx.tolist()]
    rows.sort(key=lambda r: row_sort_key(r, ring))
    return rows


def _materialize(rows, basis: SoaPolySet, policy: ExecPolicy):
    """Pass 1 + pass 2: per-row lengths, prefix plan, flat shifted streams.

    Returns (lens, keys, vals, lead_keys) where keys descend within each
    segment (shifting preserves the stored term order).
    """
    ring = basis.ring
    ks = np.array([r.basis_index for r in rows], dtype=np.int64)
    shifts = np.array([r.shift for r in rows], dtype=np.int64).reshape(len(rows), ring.n_vars)
    lens = basis.length[ks]
    if (lens < 1).any():
        raise PropertyViolationError("zero polynomial referenced as a reducer")
    off = exclusive_scan(lens, policy)
    total = int(off[-1])
    gather = np.repeat(basis.offset[ks], lens) + (
        np.arange(total, dtype=np.int64) - np.repeat(off[:-1], lens)
    )
    exps = basis.exps[gather] + np.repeat(shifts, lens, axis=0)
    keys = key_pack_vec(exps, ring)
    vals = basis.coeff[gather].copy()
    lead_keys = keys[off[:-1]]
    return lens, keys, vals, lead_keys


def _reducer_preference(basis: SoaPolySet, candidates) -> list:
    """Candidate order for closure: smallest leading monomial first, then index."""
    order = []
    for k in candidates:
        lead = basis.exps[int(basis.offset[k])]
        order.append((tuple(int(w) for w in key_pack_vec(lead[None, :], basis.ring)[0]), k))
    order.sort()
    return [k for _, k in order]


def closure_expand(
    dict_keys_desc: np.ndarray,
    basis: SoaPolySet,
    done: np.ndarray | None = None,
    candidates=None,
    round_id: int = 1,
) -> list:
    """One round of one-step reduction closure over a descending dictionary.

    For every dictionary monomial not marked done, pick the preferred basis
    divisor (smallest leading monomial, then lowest index) and emit the
    reducer row whose lead is exactly that monomial.  Returns [] at a fixed
    point.
    """
    ring = basis.ring
    n = len(dict_keys_desc)
    if n == 0:
        return []
    if done is None:
        done = np.zeros(n, dtype=bool)
    if candidates is None:
        candidates = range(len(basis))
    scan = np.flatnonzero(~done)
    if len(scan) == 0:
        return []
    exps = key_unpack_vec(dict_keys_desc[scan], ring)
    reducer = np.full(len(scan), -1, dtype=np.int64)
    for k in _reducer_preference(basis, candidates):
        lm = basis.exps[int(basis.offset[k])]
        hit = (reducer < 0) & (exps >= lm[None, :]).all(axis=1)
        reducer[hit] = k
    rows = []
    # ascending key(m) within the round: walk the descending dictionary backwards
    for j in range(len(scan) - 1, -1, -1):
        k = int(reducer[j])
        if k < 0:
            continue
        lead = tuple(int(x) for x in basis.exps[int(basis.offset[k])])
        m = tuple(int(x) for x in exps[j])
        rows.append(Row(mon_div(m, lead), k, RowRole.REDUCER, round_id))
    return rows


def _merge_dict(dict_asc, done, new_keys_sorted_unique):
    """Union of two strictly ascending key sets, carrying the done flags."""
    merged = np.vstack([dict_asc, new_keys_sorted_unique])
    srt, _ = radix_sort(merged)
    out, _ = unique_sorted(srt, check=False)
    new_done = np.zeros(len(out), dtype=bool)
    if len(dict_asc):
        pos = lower_bound(out, dict_asc)
        new_done[pos] = done
    return out, new_done


def compile_batch(
    rows,
    basis: SoaPolySet,
    closure: Closure = Closure.ONE_STEP_REDUCTION,
    policy: ExecPolicy = DEFAULT_POLICY,
    candidates=None,
) -> LayoutPlan:
    """Compile a deterministic row list into a layout plan.

    ``rows`` must already be in the deterministic order produced by
    select_rows; closure rows are appended per discovery round.  The output
    is byte-identical for any ExecPolicy.
    """
    ring = basis.ring
    rows = list(rows)
    counters = PlanCounters()
    timings = {"dict_build_ns": 0, "row_assemble_ns": 0}
    if not rows:
        plan = LayoutPlan(
            ring,
            np.zeros(1, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.uint64),
            np.zeros((0, ring.n_key_words), dtype=np.uint64),
            (),
            counters,
            {"dict_build_ns": 0, "row_assemble_ns": 0},
        )
        plan.validate()
        return plan

    t0 = time.monotonic_ns()
    lens, keys, vals, lead_keys = _materialize(rows, basis, policy)
    len_parts, key_parts, val_parts = [lens], [keys], [vals]
    counters.keys_emitted += len(keys)
    counters.keys_generated_total += len(keys)

    srt, _ = radix_sort(keys, policy)
    dict_asc, _ = unique_sorted(srt, policy, check=False)
    done = np.zeros(len(dict_asc), dtype=bool)
    all_lead_keys = [lead_keys]

    if closure is Closure.ONE_STEP_REDUCTION:
        while True:
            # leads of existing rows are covered; everything scanned below
            # is settled one way or the other after this round
            done[lower_bound(dict_asc, np.vstack(all_lead_keys))] = True
            new_rows = closure_expand(
                dict_asc[::-1], basis, done[::-1].copy(), candidates,
                round_id=counters.closure_rounds + 1,
            )
            done[:] = True
            if not new_rows:
                break
            counters.closure_rounds += 1
            rows.extend(new_rows)
            nlens, nkeys, nvals, nleads = _materialize(new_rows, basis, policy)
            counters.keys_emitted += len(nkeys)
            counters.keys_generated_total += len(nkeys)
            len_parts.append(nlens)
            key_parts.append(nkeys)
            val_parts.append(nvals)
            all_lead_keys.append(nleads)
            nsrt, _ = radix_sort(nkeys, policy)
            nuniq, _ = unique_sorted(nsrt, policy, check=False)
            dict_asc, done = _merge_dict(dict_asc, done, nuniq)
            if len(dict_asc) > DICT_CAP:
                raise SizeCapError(
                    f"dictionary exceeded {DICT_CAP} entries after "
                    f"{counters.closure_rounds} closure rounds"
                )
    timings["dict_build_ns"] = time.monotonic_ns() - t0

    t1 = time.monotonic_ns()
    all_lens = np.concatenate(len_parts)
    flat_keys = np.vstack(key_parts)
    flat_vals = np.concatenate(val_parts)
    row_ptr = exclusive_scan(all_lens, policy)
    n_dict = len(dict_asc)
    # dictionary join over the flat stream (sorted within each row segment);
    # any miss is a closure defect, not an input error
    col_asc = merge_join_index(flat_keys, dict_asc, policy, check=False)
    col_ind = (n_dict - 1) - col_asc
    dict_desc = dict_asc[::-1].copy()
    counters.r = len(rows)
    counters.N = n_dict
    counters.M = int(row_ptr[-1])
    counters.nnz = counters.M
    timings["row_assemble_ns"] = time.monotonic_ns() - t1

    plan = LayoutPlan(
        ring, row_ptr, col_ind, flat_vals, dict_desc, tuple(rows), counters,
        {"dict_build_ns": timings["dict_build_ns"], "row_assemble_ns": timings["row_assemble_ns"]},
    )
    plan.validate()
    return plan


def decode_row(plan: LayoutPlan, i: int) -> Poly:
    """Rebuild row i as an exact polynomial from the plan arrays."""
    if not 0 <= i < plan.n_rows:
        raise IndexError(f"row {i} out of range")
    s, e = int(plan.row_ptr[i]), int(plan.row_ptr[i + 1])
    cols = plan.col_ind[s:e]
    exps = key_unpack_vec(plan.dict_keys[cols], plan.ring)
    terms = tuple(
        (tuple(int(x) for x in exps[j]), int(plan.val[s + j])) for j in range(e - s)
    )
    return Poly(plan.ring, terms)


def row_lead_cols(plan: LayoutPlan) -> np.ndarray:
    """Leading (first) column of every row."""
    if plan.n_rows == 0:
        return np.zeros(0, dtype=np.int64)
    return plan.col_ind[plan.row_ptr[:-1]]


_HIST_BUCKETS = (1, 2, 4, 8, 16, 32, 64, 128, 256, 1 << 62)


def plan_stats(plan: LayoutPlan) -> dict:
    """Shape counters plus a row-length histogram (power-of-two buckets)."""
    lens = np.diff(plan.row_ptr)
    hist = {}
    lo = 0
    for b in _HIST_BUCKETS:
        n = int(((lens > lo) & (lens <= b)).sum())
        if n:
            label = f"<={b}" if b < (1 << 62) else f">{lo}"
            hist[label] = n
        lo = b
    c = plan.counters
    return {
        "r": c.r,
        "N": c.N,
        "M": c.M,
        "nnz": c.nnz,
        "closure_rounds": c.closure_rounds,
        "keys_emitted": c.keys_emitted,
        "keys_generated_total": c.keys_generated_total,
        "row_length_histogram": hist,
    }


def plan_to_text(plan: LayoutPlan) -> str:
    """Self-describing textual dump: one line per array, decimal values."""
    c = plan.counters
    lines = [
        "fpgb-plan v1",
        f"p {plan.ring.modulus.p}",
        f"order {plan.ring.order}",
        "vars " + " ".join(plan.ring.var_names),
        f"counters r={c.r} N={c.N} M={c.M} nnz={c.nnz} closure_rounds={c.closure_rounds} "
        f"keys_emitted={c.keys_emitted} keys_generated_total={c.keys_generated_total}",
        "row_ptr " + " ".join(str(int(x)) for x in plan.row_ptr),
        "col_ind " + " ".join(str(int(x)) for x in plan.col_ind),
        "val " + " ".join(str(int(x)) for x in plan.val),
        "dict_keys " + " ".join(str(int(w)) for w in plan.dict_keys.ravel()),
        "row_meta "
        + " ".join(
            ",".join(
                [str(e) for e in r.shift] + [str(r.basis_index), str(r.role.value), str(r.provenance)]
            )
            for r in plan.row_meta
        ),
    ]
    return "\n".join(lines) + "\n"


def plan_digest(plan: LayoutPlan) -> str:
    import hashlib

    return hashlib.sha256(plan_to_text(plan).encode()).hexdigest()
