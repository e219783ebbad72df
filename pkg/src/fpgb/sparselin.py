"""Sparse exact linear algebra over F_p on compiled batch matrices.

CSR matrices materialize directly from layout plans.  Three engines work on
them:

- ``psge_reduce``: structured Gaussian elimination scheduled over contiguous
  column panels, with a sparsity-first pivot rule and full back-reduction,
  so its nonzero output rows coincide with the reduced row echelon form;
- ``dense_gauss``: the brute-force oracle (size-capped) used to cross-check
  ranks, row spaces, and null spaces;
- ``wiedemann_solve``: black-box kernel extraction from Krylov sequences
  via Berlekamp-Massey, applying the operator to small blocks of vectors
  at a time; rectangular instances are framed through A^T A (right) or
  A A^T (left) and every candidate is verified against A itself.

All randomness is seeded and every probabilistic result carries its seed
trail for replay.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .bulk import exclusive_scan, radix_sort
from .errors import (
    PreconditionError,
    ProbabilisticFailureError,
    PropertyViolationError,
    SizeCapError,
)
from .fp import FieldModulus, KernelArith
from .symbolic import LayoutPlan

DENSE_CAP = 512


@dataclass
class CsrMatrix:
    n_rows: int
    n_cols: int
    row_ptr: np.ndarray  # (n_rows+1,) int64
    col_ind: np.ndarray  # (nnz,) int64, ascending within each row
    val: np.ndarray  # (nnz,) uint64, nonzero residues
    modulus: FieldModulus

    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    def validate(self):
        if self.row_ptr[0] != 0 or not (self.row_ptr[-1] == len(self.col_ind) == len(self.val)):
            raise PropertyViolationError("CSR pointers inconsistent")
        if (np.diff(self.row_ptr) < 0).any():
            raise PropertyViolationError("CSR row_ptr not monotone")
        p = self.modulus.p
        if len(self.val) and (self.val.min() < 1 or self.val.max() >= p):
            raise PropertyViolationError("CSR values outside [1, p)")
        for i in range(self.n_rows):
            seg = self.col_ind[self.row_ptr[i] : self.row_ptr[i + 1]]
            if len(seg):
                if seg[0] < 0 or seg[-1] >= self.n_cols:
                    raise PropertyViolationError(f"column out of range in row {i}")
                if (np.diff(seg) <= 0).any():
                    raise PropertyViolationError(f"row {i} columns not strictly ascending")

    def row(self, i: int):
        s, e = int(self.row_ptr[i]), int(self.row_ptr[i + 1])
        return self.col_ind[s:e], self.val[s:e]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.uint64)
        for i in range(self.n_rows):
            cols, vals = self.row(i)
            out[i, cols] = vals
        return out


def csr_from_arrays(n_rows, n_cols, row_ptr, col_ind, val, m: FieldModulus) -> CsrMatrix:
    A = CsrMatrix(
        int(n_rows),
        int(n_cols),
        np.asarray(row_ptr, dtype=np.int64),
        np.asarray(col_ind, dtype=np.int64),
        np.asarray(val, dtype=np.uint64),
        m,
    )
    A.validate()
    return A


def csr_from_dense(mat: np.ndarray, m: FieldModulus) -> CsrMatrix:
    mat = np.asarray(mat, dtype=np.uint64) % np.uint64(m.p)
    rows, cols = np.nonzero(mat)
    row_ptr = exclusive_scan(np.bincount(rows, minlength=mat.shape[0]))
    return csr_from_arrays(mat.shape[0], mat.shape[1], row_ptr, cols, mat[rows, cols], m)


def csr_from_plan(plan: LayoutPlan, m: FieldModulus) -> CsrMatrix:
    """Reinterpret a layout plan as its batch matrix (no copies of substance)."""
    plan.validate()
    return csr_from_arrays(
        plan.n_rows, plan.n_cols, plan.row_ptr, plan.col_ind, plan.val, m
    )


def csr_transpose(A: CsrMatrix) -> CsrMatrix:
    """Transpose by stable counting sort on column indices."""
    nnz = A.nnz()
    if nnz == 0:
        return csr_from_arrays(
            A.n_cols, A.n_rows, np.zeros(A.n_cols + 1, dtype=np.int64),
            np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.uint64), A.modulus,
        )
    _, perm = radix_sort(A.col_ind.astype(np.uint64).reshape(-1, 1))
    row_of = np.repeat(np.arange(A.n_rows, dtype=np.int64), np.diff(A.row_ptr))
    t_row_ptr = exclusive_scan(np.bincount(A.col_ind, minlength=A.n_cols))
    return csr_from_arrays(
        A.n_cols, A.n_rows, t_row_ptr, row_of[perm], A.val[perm], A.modulus
    )


def matrix_market(A: CsrMatrix) -> str:
    """Coordinate-format text dump, 1-based indices."""
    lines = [
        "%%MatrixMarket matrix coordinate integer general",
        f"{A.n_rows} {A.n_cols} {A.nnz()}",
    ]
    for i in range(A.n_rows):
        cols, vals = A.row(i)
        for c, v in zip(cols.tolist(), vals.tolist()):
            lines.append(f"{i + 1} {c + 1} {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SpMV / SpMM with windowed lazy accumulation
# ---------------------------------------------------------------------------


def spmm(A: CsrMatrix, X: np.ndarray) -> np.ndarray:
    """Exact A @ X over F_p for a dense block X of shape (n_cols, b).

    Products accumulate unreduced inside the backend's lazy window; one
    reduction runs per window chunk and one per row.
    """
    X = np.asarray(X, dtype=np.uint64)
    if X.ndim == 1:
        return spmm(A, X[:, None])[:, 0]
    if X.shape[0] != A.n_cols:
        raise PreconditionError(f"dimension mismatch: {A.n_cols} vs {X.shape[0]}")
    b = X.shape[1]
    out = np.zeros((A.n_rows, b), dtype=np.uint64)
    if A.nnz() == 0 or b == 0:
        return out
    ar = KernelArith(A.modulus)
    vals_d = ar.enter(A.val)
    x_d = ar.enter(X)
    prods = ar.mul_lazy(vals_d[:, None], x_d[A.col_ind])
    k = ar.lazy_window()
    lens = np.diff(A.row_ptr)
    nchunks = -(-lens // k)
    chunk_base = exclusive_scan(nchunks)
    row_of_chunk = np.repeat(np.arange(A.n_rows), nchunks)
    within = np.arange(int(chunk_base[-1]), dtype=np.int64) - np.repeat(chunk_base[:-1], nchunks)
    starts = A.row_ptr[row_of_chunk] + k * within
    partials = ar.reduce_acc(np.add.reduceat(prods, starts, axis=0))
    nonempty = nchunks > 0
    first_chunk = chunk_base[:-1][nonempty]
    sums = np.add.reduceat(partials, first_chunk, axis=0) % np.uint64(A.modulus.p)
    out[nonempty] = sums
    return ar.leave(out)


def spmv(A: CsrMatrix, x: np.ndarray) -> np.ndarray:
    return spmm(A, x)


# ---------------------------------------------------------------------------
# Dense oracle
# ---------------------------------------------------------------------------


def dense_gauss(mat: np.ndarray, m: FieldModulus):
    """Reduced row echelon form by straightforward elimination.

    Brute-force reference path; dimensions are capped so it never becomes
    an accidental production engine.  Returns (rank, rref, pivot_cols).
    """
    mat = np.asarray(mat, dtype=np.uint64) % np.uint64(m.p)
    r, c = mat.shape if mat.ndim == 2 else (0, 0)
    if max(r, c, 1) > DENSE_CAP:
        raise SizeCapError(f"dense path capped at {DENSE_CAP}, got {r}x{c}")
    A = mat.copy()
    p = np.uint64(m.p)
    row = 0
    pivots = []
    for col in range(c):
        if row == r:
            break
        nz = np.flatnonzero(A[row:, col])
        if len(nz) == 0:
            continue
        piv = row + int(nz[0])
        if piv != row:
            A[[row, piv]] = A[[piv, row]]
        inv = np.uint64(pow(int(A[row, col]), m.p - 2, m.p))
        A[row] = A[row] * inv % p
        others = np.flatnonzero(A[:, col])
        others = others[others != row]
        if len(others):
            coef = (p - A[others, col])[:, None]
            A[others] = (A[others] + coef * A[row][None, :]) % p
        pivots.append(col)
        row += 1
    return row, A, pivots


def dense_rank(mat: np.ndarray, m: FieldModulus) -> int:
    return dense_gauss(mat, m)[0]


def dense_right_nullspace(mat: np.ndarray, m: FieldModulus):
    """Basis of {v : mat v = 0} from the RREF free columns."""
    mat = np.asarray(mat, dtype=np.uint64)
    rank, rref, pivots = dense_gauss(mat, m)
    n = mat.shape[1]
    free = [j for j in range(n) if j not in set(pivots)]
    p = m.p
    basis = []
    for j in free:
        v = np.zeros(n, dtype=np.uint64)
        v[j] = 1
        for i, pc in enumerate(pivots):
            coef = int(rref[i, j])
            if coef:
                v[pc] = p - coef
        basis.append(v)
    return basis


# ---------------------------------------------------------------------------
# Panel-structured elimination
# ---------------------------------------------------------------------------


@dataclass
class EchelonResult:
    """Echelon form of a batch matrix, split by leading-column provenance.

    ``pivot_cols`` lists the leading columns of all nonzero output rows
    (ascending); rows whose leading column coincides with some input row's
    leading column land in ``pivot_rows``, rows with new leading columns in
    ``nonpivot_rows``.  Rows are (lead_col, col_array, val_array), monic,
    fully reduced against each other.
    """

    pivot_cols: list
    pivot_rows: list
    nonpivot_rows: list
    zero_row_count: int
    rank: int
    fill_generated: int


def _sparse_axpy(cols_a, vals_a, coef, cols_b, vals_b, ar, p):
    """a - coef*b over sparse rows; returns (cols, vals, created_nonzeros)."""
    union = np.union1d(cols_a, cols_b)
    va = np.zeros(len(union), dtype=np.uint64)
    va[np.searchsorted(union, cols_a)] = vals_a
    vb = np.zeros(len(union), dtype=np.uint64)
    vb[np.searchsorted(union, cols_b)] = vals_b
    prod = ar.mul(vb, np.uint64(coef))
    out = (va + (np.uint64(p) - prod)) % np.uint64(p)
    keep = out != 0
    created = int((keep & (va == 0)).sum())
    return union[keep], out[keep], created


def psge_reduce(A: CsrMatrix, panel_width: int = 256) -> EchelonResult:
    """Panel-scheduled structured elimination to fully reduced echelon form.

    Pivot rule: among rows leading at the panel's current column, take the
    one with the fewest nonzeros (lowest row index on ties).  The trailing
    update stays sparse; per-step fill is accumulated in fill_generated.
    """
    if panel_width < 1:
        raise PreconditionError("panel_width must be >= 1")
    m = A.modulus
    ar = KernelArith(m)
    p = m.p
    rows = []
    orig_leads = set()
    by_lead: dict = {}
    zero_rows = 0
    for i in range(A.n_rows):
        cols, vals = A.row(i)
        if len(cols) == 0:
            zero_rows += 1
            rows.append(None)
            continue
        rows.append([cols.copy(), ar.enter(vals.copy())])
        orig_leads.add(int(cols[0]))
        by_lead.setdefault(int(cols[0]), []).append(i)

    pivots: dict = {}
    fill = 0
    for panel_start in range(0, max(A.n_cols, 1), panel_width):
        panel_end = min(A.n_cols, panel_start + panel_width)
        for col in range(panel_start, panel_end):
            cand = by_lead.pop(col, None)
            if not cand:
                continue
            cand.sort()
            pv = min(cand, key=lambda i: (len(rows[i][0]), i))
            pcols, pvals = rows[pv]
            inv = ar.inv(int(pvals[0]))
            rows[pv][1] = ar.mul(pvals, np.uint64(inv))
            pivots[col] = pv
            for i in cand:
                if i == pv:
                    continue
                cols_i, vals_i = rows[i]
                ncols, nvals, created = _sparse_axpy(
                    cols_i, vals_i, int(vals_i[0]), rows[pv][0], rows[pv][1], ar, p
                )
                fill += created
                if len(ncols) == 0:
                    rows[i] = None
                    zero_rows += 1
                else:
                    rows[i] = [ncols, nvals]
                    by_lead.setdefault(int(ncols[0]), []).append(i)

    # back-reduction: clear every pivot column from the other rows' tails
    for col in sorted(pivots, reverse=True):
        pv = pivots[col]
        for qcol, q in pivots.items():
            if q == pv or qcol >= col:
                continue
            cols_q, vals_q = rows[q]
            at = np.searchsorted(cols_q, col)
            if at < len(cols_q) and cols_q[at] == col:
                ncols, nvals, created = _sparse_axpy(
                    cols_q, vals_q, int(vals_q[at]), rows[pv][0], rows[pv][1], ar, p
                )
                fill += created
                rows[q] = [ncols, nvals]

    pivot_rows = []
    nonpivot_rows = []
    for col in sorted(pivots):
        i = pivots[col]
        cols_i, vals_i = rows[i]
        entry = (col, cols_i, ar.leave(vals_i))
        if col in orig_leads:
            pivot_rows.append(entry)
        else:
            nonpivot_rows.append(entry)
    rank = len(pivots)
    return EchelonResult(
        pivot_cols=sorted(pivots),
        pivot_rows=pivot_rows,
        nonpivot_rows=nonpivot_rows,
        zero_row_count=A.n_rows - rank,
        rank=rank,
        fill_generated=fill,
    )


# ---------------------------------------------------------------------------
# Berlekamp-Massey and Wiedemann
# ---------------------------------------------------------------------------


def berlekamp_massey(seq, m: FieldModulus):
    """Minimal linear recurrence of a sequence over F_p.

    Returns the monic characteristic polynomial as an ascending coefficient
    list [c_0, ..., c_{L-1}, 1]: for all valid k,
    s_{k+L} + c_{L-1} s_{k+L-1} + ... + c_0 s_k = 0.
    """
    seq = [int(x) % m.p for x in seq]
    if not seq:
        raise PreconditionError("empty sequence")
    p = m.p
    C = [1]
    B = [1]
    L, shift, b = 0, 1, 1
    for n, s in enumerate(seq):
        d = s
        for i in range(1, L + 1):
            d = (d + C[i] * seq[n - i]) % p
        if d == 0:
            shift += 1
            continue
        coef = d * pow(b, p - 2, p) % p
        if 2 * L <= n:
            T = C[:]
            C = C + [0] * (len(B) + shift - len(C))
            for i, cb in enumerate(B):
                C[i + shift] = (C[i + shift] - coef * cb) % p
            L, B, b, shift = n + 1 - L, T, d, 1
        else:
            C = C + [0] * max(0, len(B) + shift - len(C))
            for i, cb in enumerate(B):
                C[i + shift] = (C[i + shift] - coef * cb) % p
            shift += 1
    # connection C(x) = 1 + c_1 x + ... annihilates s_n + sum c_i s_{n-i};
    # the characteristic polynomial is its reverse
    C = C[: L + 1] + [0] * max(0, L + 1 - len(C))
    return [c % p for c in reversed(C)]


class KernelMode(enum.Enum):
    MINPOLY = "minpoly"
    RIGHT_KERNEL = "right_kernel"


@dataclass
class KernelBasis:
    side: str  # "left" | "right"
    vectors: list = field(default_factory=list)
    dimension_found: int = 0
    seed_trail: tuple = ()


def _block_proj(U: np.ndarray, W: np.ndarray, p: int) -> np.ndarray:
    prods = (U * W) % np.uint64(p)
    return prods.sum(axis=0, dtype=np.uint64) % np.uint64(p)


def _try_extend_basis(vec: np.ndarray, reduced: list, p: int) -> bool:
    """Incremental reduction; appends vec to the basis iff independent."""
    v = vec.copy() % np.uint64(p)
    for lead, bvec in reduced:
        c = int(v[lead])
        if c:
            v = (v + (p - c) * bvec) % np.uint64(p)
    nz = np.flatnonzero(v)
    if len(nz) == 0:
        return False
    lead = int(nz[0])
    v = v * np.uint64(pow(int(v[lead]), p - 2, p)) % np.uint64(p)
    reduced.append((lead, v))
    return True


def wiedemann_solve(
    A: CsrMatrix,
    mode: KernelMode,
    seed: int,
    block_width: int = 4,
    max_vectors: int | None = None,
    max_rounds: int = 12,
    stall_rounds: int = 3,
):
    """Black-box Krylov solve on A (square) or the A^T A framing (rectangular).

    MINPOLY returns the minimal recurrence annihilating a probed projection
    sequence.  RIGHT_KERNEL collects verified kernel vectors of A across
    seeded probe rounds; degenerate draws retry with derived seeds, and an
    exhausted budget either confirms a trivial kernel (dense, small case)
    or raises ProbabilisticFailureError carrying the seed trail.
    """
    m = A.modulus
    p = m.p
    square = A.n_rows == A.n_cols
    if square:
        dim = A.n_cols
        apply_b = lambda X: spmm(A, X)
    else:
        At = csr_transpose(A)
        dim = A.n_cols
        apply_b = lambda X: spmm(At, spmm(A, X))
    if dim == 0:
        if mode is KernelMode.MINPOLY:
            return [1]
        return KernelBasis("right", [], 0, ())

    root = np.random.SeedSequence(seed)
    trail = []
    b = max(1, block_width)
    target = dim if max_vectors is None else max_vectors
    reduced: list = []
    vectors: list = []
    stalled = 0

    for round_no in range(max_rounds):
        child = root.spawn(1)[0]
        trail.append((seed, round_no))
        rng = np.random.default_rng(child)
        V = rng.integers(0, p, (dim, b), dtype=np.uint64)
        U = rng.integers(0, p, (dim, b), dtype=np.uint64)
        seqs = np.empty((2 * dim, b), dtype=np.uint64)
        W = V.copy()
        for k in range(2 * dim):
            seqs[k] = _block_proj(U, W, p)
            W = apply_b(W)

        if mode is KernelMode.MINPOLY:
            col = seqs[:, 0]
            if (col == 0).all():
                continue  # degenerate projection, retry with next derived seed
            return berlekamp_massey(col.tolist(), m)

        progress = False
        for j in range(b):
            if len(vectors) >= target:
                break
            f = berlekamp_massey(seqs[:, j].tolist(), m)
            t = next((i for i, c in enumerate(f) if c), None)
            if t is None or t == 0:
                continue
            g = np.array(f[t:], dtype=np.uint64)
            v = V[:, j : j + 1]
            acc = g[-1] * v % np.uint64(p)
            for c in g[:-1][::-1].tolist():
                acc = (apply_b(acc) + np.uint64(c) * v) % np.uint64(p)
            for _ in range(t - 1):
                nxt = apply_b(acc)
                if (nxt == 0).all():
                    break
                acc = nxt
            w = acc[:, 0]
            if (w == 0).all():
                continue
            if (spmv(A, w) != 0).any():
                continue  # A^T A kernel vector outside ker(A); reject and retry
            if _try_extend_basis(w, reduced, p):
                vectors.append(w.copy())
                progress = True
        if mode is KernelMode.RIGHT_KERNEL:
            if len(vectors) >= target:
                break
            stalled = 0 if progress else stalled + 1
            if stalled > stall_rounds and vectors:
                break

    if mode is KernelMode.MINPOLY:
        raise ProbabilisticFailureError("all minpoly projections were zero", trail)
    if not vectors:
        if max(A.n_rows, A.n_cols) <= DENSE_CAP:
            if dense_rank(A.to_dense(), m) == A.n_cols:
                return KernelBasis("right", [], 0, tuple(trail))
        raise ProbabilisticFailureError("no kernel vectors found within budget", trail)
    return KernelBasis("right", vectors, len(vectors), tuple(trail))


def left_kernel(A: CsrMatrix, count: int, seed: int) -> KernelBasis:
    """Up to ``count`` independent vectors v with v^T A = 0.

    Size-dispatched: the dense oracle engine below the cap, Wiedemann on the
    transpose above it.  Every vector is re-verified by one SpMV on A^T.
    """
    if count < 1:
        raise PreconditionError("count must be >= 1")
    At = csr_transpose(A)
    if max(A.n_rows, A.n_cols) <= DENSE_CAP:
        vectors = dense_right_nullspace(At.to_dense(), A.modulus)[:count]
        trail = ()
    else:
        kb = wiedemann_solve(At, KernelMode.RIGHT_KERNEL, seed, max_vectors=count)
        vectors, trail = kb.vectors, kb.seed_trail
    for v in vectors:
        if (spmv(At, v) != 0).any():
            raise PropertyViolationError("left kernel candidate fails v^T A = 0")
    return KernelBasis("left", vectors, len(vectors), trail)
