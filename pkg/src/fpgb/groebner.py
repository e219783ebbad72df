"""Groebner bases over F_p: an F4-style batched driver and a scalar oracle.

The F4 path runs: select the minimal-degree critical pairs, expand them into
shifted reducer rows, compile the batch into a sparse plan (with one-step
reduction closure), eliminate with the panel engine, and harvest reduced
rows whose leading columns are new.  The reference path is a textbook
Buchberger loop (product criterion only, scalar normal-form reduction) that
shares nothing with the batch machinery beyond the polynomial primitives.
Both finish with the same interreduction, so a reduced basis is canonical
and the two drivers must agree byte for byte.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bulk import ExecPolicy
from .errors import NonterminationError, PreconditionError
from .fp import FieldModulus
from .monomials import Ring, mon_div, mon_divides, mon_lcm, mon_mul, key_unpack_vec
from .polynomials import (
    Poly,
    SoaPolySet,
    poly_add_scaled,
    poly_monic,
    poly_mul_mon,
    soa_pack,
)
from .sparselin import (
    EchelonResult,
    KernelBasis,
    KernelMode,
    csr_from_plan,
    csr_from_dense,
    dense_gauss,
    left_kernel,
    psge_reduce,
    wiedemann_solve,
)
from .symbolic import (
    BatchSpec,
    Closure,
    LayoutPlan,
    PairTarget,
    compile_batch,
    select_rows,
)

MAX_STEPS_DEFAULT = 10_000


def spoly(f: Poly, g: Poly) -> Poly:
    """S(f, g) = (L/LT(f)) f - (L/LT(g)) g for L = lcm of the leading monomials."""
    if f.is_zero() or g.is_zero():
        raise PreconditionError("S-polynomial of a zero polynomial")
    ring = f.ring
    p = ring.modulus.p
    L = mon_lcm(f.lm(), g.lm())
    tf = poly_mul_mon(mon_div(L, f.lm()), f)
    tg = poly_mul_mon(mon_div(L, g.lm()), g)
    inv_f = pow(f.lc(), p - 2, p)
    inv_g = pow(g.lc(), p - 2, p)
    left = Poly(ring, tuple((e, c * inv_f % p) for e, c in tf.terms))
    return poly_add_scaled(left, (p - inv_g) % p, tg)


def _reducer_table(basis: list) -> list:
    """Reduction order: smallest leading monomial first, then lowest index."""
    order = sorted(range(len(basis)), key=lambda i: (basis[i].ring.sort_key(basis[i].lm()), i))
    return [(basis[i].lm(), i) for i in order]


def normal_form(f: Poly, basis: list) -> Poly:
    """Full remainder of f modulo the basis.

    Deterministic reducer choice matches the batch compiler's closure rule;
    no monomial of the result is divisible by any basis leading monomial.
    """
    live = [g for g in basis if not g.is_zero()]
    if f.is_zero() or not live:
        return f
    ring = f.ring
    p = ring.modulus.p
    table = _reducer_table(live)
    work = f
    out = []
    while not work.is_zero():
        lead, lc = work.terms[0]
        hit = None
        for lm_g, i in table:
            if mon_divides(lm_g, lead):
                hit = i
                break
        if hit is None:
            out.append((lead, lc))
            work = Poly(ring, work.terms[1:])
            continue
        g = live[hit]
        coef = lc * pow(g.lc(), p - 2, p) % p
        shifted = poly_mul_mon(mon_div(lead, g.lm()), g)
        work = poly_add_scaled(work, p - coef, shifted)
    return Poly(ring, tuple(out))


@dataclass
class Pair:
    i: int
    j: int
    lcm: tuple
    degree: int
    key: tuple

    def sort_tuple(self):
        return (self.degree, self.key, self.i, self.j)


@dataclass
class BatchStats:
    degree: int
    r: int
    N: int
    M: int
    nnz: int
    rank: int
    new_polys: int
    zero_reductions: int
    closure_rounds: int
    timings_ns: dict


@dataclass
class GroebnerState:
    ring: Ring
    basis: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    stats: list = field(default_factory=list)
    zero_reductions: int = 0
    _soa: SoaPolySet | None = None

    def soa(self) -> SoaPolySet:
        if self._soa is None or len(self._soa) != len(self.basis):
            self._soa = soa_pack(self.basis, self.ring)
        return self._soa


def _make_pair(state: GroebnerState, i: int, j: int) -> Pair:
    lcm = mon_lcm(state.basis[i].lm(), state.basis[j].lm())
    return Pair(i, j, lcm, sum(lcm), state.ring.sort_key(lcm))


def update_pairs(state: GroebnerState, new_poly: Poly) -> GroebnerState:
    """Add a monic polynomial to the basis with Gebauer-Moller pair pruning.

    New pairs drop by the lcm-divisibility (chain) criterion and the product
    criterion; existing pairs whose lcm factors through the newcomer's
    leading monomial drop as well.
    """
    if new_poly.is_zero() or new_poly.lc() != 1:
        raise PreconditionError("basis members must be monic and nonzero")
    t = len(state.basis)
    state.basis.append(new_poly)
    state._soa = None
    lm_t = new_poly.lm()
    cands = [_make_pair(state, i, t) for i in range(t)]

    # chain criterion among the new pairs: drop any whose lcm is properly
    # divisible by another new pair's lcm
    kept = []
    for a in cands:
        dominated = False
        for b in cands:
            if b.lcm != a.lcm and mon_divides(b.lcm, a.lcm):
                dominated = True
                break
        if not dominated:
            kept.append(a)
    # one representative per lcm (lowest partner index)
    by_lcm: dict = {}
    for c in kept:
        by_lcm.setdefault(c.lcm, c)
    survivors = []
    for c in by_lcm.values():
        # product criterion: coprime leading monomials reduce to zero
        if c.lcm != mon_mul(state.basis[c.i].lm(), lm_t):
            survivors.append(c)

    # chain criterion against queued old pairs
    old = []
    for q in state.pairs:
        if (
            mon_divides(lm_t, q.lcm)
            and mon_lcm(state.basis[q.i].lm(), lm_t) != q.lcm
            and mon_lcm(state.basis[q.j].lm(), lm_t) != q.lcm
        ):
            continue
        old.append(q)
    state.pairs = sorted(old + survivors, key=Pair.sort_tuple)
    return state


def select_batch(state: GroebnerState):
    """Normal strategy: every queued pair of minimal lcm total degree."""
    if not state.pairs:
        raise PreconditionError("empty pair queue")
    d = state.pairs[0].degree
    chosen = [q for q in state.pairs if q.degree == d]
    state.pairs = state.pairs[len(chosen):]
    targets = [PairTarget(q.lcm, pid, q.i, q.j) for pid, q in enumerate(chosen)]
    spec = BatchSpec(targets=targets, candidates=tuple(range(len(state.basis))))
    return spec, d


@dataclass
class F4Config:
    numeric: str = "psge"  # psge | dense | wiedemann
    panel_width: int = 256
    block_width: int = 4
    seed: int = 0
    workers: int = 1
    max_steps: int = MAX_STEPS_DEFAULT
    policy: ExecPolicy | None = None

    def exec_policy(self) -> ExecPolicy:
        return self.policy if self.policy is not None else ExecPolicy(self.workers)


def _decode_sparse(plan: LayoutPlan, cols: np.ndarray, vals: np.ndarray) -> Poly:
    exps = key_unpack_vec(plan.dict_keys[cols], plan.ring)
    terms = tuple(
        (tuple(int(x) for x in exps[k]), int(vals[k])) for k in range(len(cols))
    )
    return Poly(plan.ring, terms)


def _dense_echelon(plan: LayoutPlan, m: FieldModulus) -> EchelonResult:
    """Dense-oracle stand-in for the panel engine (small batches only)."""
    A = csr_from_plan(plan, m)
    rank, rref, pivots = dense_gauss(A.to_dense(), m)
    from .symbolic import row_lead_cols

    orig = set(row_lead_cols(plan).tolist())
    pivot_rows, nonpivot_rows = [], []
    for r_i, col in enumerate(pivots):
        cols = np.flatnonzero(rref[r_i]).astype(np.int64)
        entry = (col, cols, rref[r_i][cols])
        (pivot_rows if col in orig else nonpivot_rows).append(entry)
    return EchelonResult(list(pivots), pivot_rows, nonpivot_rows, A.n_rows - rank, rank, 0)


def f4_step(state: GroebnerState, config: F4Config | None = None):
    """One batch: select, compile, eliminate, harvest new basis polynomials.

    Returns (plan, echelon, kernel) for instrumentation; kernel is None
    unless the config requests the relation-discovery pass.
    """
    config = config or F4Config()
    ring = state.ring
    spec, degree = select_batch(state)
    basis_snapshot = list(state.basis)
    soa = state.soa()
    rows = select_rows(spec, soa)
    plan = compile_batch(rows, soa, Closure.ONE_STEP_REDUCTION, config.exec_policy())

    t0 = time.monotonic_ns()
    if config.numeric == "dense":
        ech = _dense_echelon(plan, ring.modulus)
    else:
        A = csr_from_plan(plan, ring.modulus)
        ech = psge_reduce(A, config.panel_width)
    numeric_ns = time.monotonic_ns() - t0

    kernel = None
    if config.numeric == "wiedemann":
        A = csr_from_plan(plan, ring.modulus)
        kernel = left_kernel(A, count=max(1, A.n_rows), seed=config.seed)
        report = verify_kernel_syzygy(plan, basis_snapshot, kernel)
        if not report.ok:
            from .errors import PropertyViolationError

            raise PropertyViolationError(f"kernel syzygy violation: {report.detail}")

    new_polys = [
        poly_monic(_decode_sparse(plan, cols, vals)) for _, cols, vals in ech.nonpivot_rows
    ]
    new_polys.sort(key=lambda f: ring.sort_key(f.lm()))
    for f in new_polys:
        update_pairs(state, f)
    state.zero_reductions += ech.zero_row_count
    state.stats.append(
        BatchStats(
            degree=degree,
            r=plan.counters.r,
            N=plan.counters.N,
            M=plan.counters.M,
            nnz=plan.counters.nnz,
            rank=ech.rank,
            new_polys=len(new_polys),
            zero_reductions=ech.zero_row_count,
            closure_rounds=plan.counters.closure_rounds,
            timings_ns={
                "dict_build": plan.timings_ns["dict_build_ns"],
                "row_assemble": plan.timings_ns["row_assemble_ns"],
                "numeric_core": numeric_ns,
                "fill_generated": ech.fill_generated,
            },
        )
    )
    return plan, ech, kernel


def reduce_basis(polys: list, ring: Ring) -> list:
    """Canonical reduced basis: minimal, tail-reduced, monic, sorted by lead."""
    work = [poly_monic(f) for f in polys if not f.is_zero()]
    work.sort(key=lambda f: ring.sort_key(f.lm()))
    minimal = []
    for f in work:
        if not any(mon_divides(g.lm(), f.lm()) for g in minimal):
            minimal.append(f)
    changed = True
    while changed:
        changed = False
        for i in range(len(minimal)):
            others = minimal[:i] + minimal[i + 1 :]
            r = normal_form(minimal[i], others)
            if r.terms != minimal[i].terms:
                minimal[i] = poly_monic(r)
                changed = True
    minimal.sort(key=lambda f: ring.sort_key(f.lm()), reverse=True)
    return minimal


def f4_groebner(system: list, ring: Ring, config: F4Config | None = None) -> list:
    """Reduced Groebner basis via the batched driver."""
    config = config or F4Config()
    state = GroebnerState(ring)
    for f in system:
        if f.is_zero():
            raise PreconditionError("zero polynomial in input system")
    for f in system:
        update_pairs(state, poly_monic(f))
    steps = 0
    while state.pairs:
        if steps >= config.max_steps:
            raise NonterminationError(f"f4 exceeded {config.max_steps} batches")
        f4_step(state, config)
        steps += 1
    return reduce_basis(state.basis, ring)


def buchberger_reference(system: list, ring: Ring, max_steps: int = MAX_STEPS_DEFAULT) -> list:
    """Textbook pair-and-reduce oracle: product criterion only.

    Intentionally independent of the batch pipeline; the only shared code is
    the polynomial/monomial layer.
    """
    for f in system:
        if f.is_zero():
            raise PreconditionError("zero polynomial in input system")
    basis = []
    queue = []

    def push_pairs(t):
        for i in range(t):
            lcm = mon_lcm(basis[i].lm(), basis[t].lm())
            if lcm == mon_mul(basis[i].lm(), basis[t].lm()):
                continue  # coprime leading monomials reduce to zero
            queue.append((sum(lcm), ring.sort_key(lcm), i, t))

    for f in system:
        basis.append(poly_monic(f))
        push_pairs(len(basis) - 1)
    steps = 0
    while queue:
        if steps >= max_steps:
            raise NonterminationError(f"buchberger exceeded {max_steps} reductions")
        queue.sort()
        _, _, i, j = queue.pop(0)
        h = normal_form(spoly(basis[i], basis[j]), basis)
        if not h.is_zero():
            basis.append(poly_monic(h))
            push_pairs(len(basis) - 1)
        steps += 1
    return reduce_basis(basis, ring)


@dataclass
class GroebnerReport:
    ok: bool
    detail: str = ""
    witness: tuple | None = None


def is_groebner(G: list, ring: Ring) -> GroebnerReport:
    """Buchberger criterion check: every S-polynomial reduces to zero."""
    live = [g for g in G if not g.is_zero()]
    for a in range(len(live)):
        for b in range(a + 1, len(live)):
            r = normal_form(spoly(live[a], live[b]), live)
            if not r.is_zero():
                return GroebnerReport(
                    False, f"S-poly of members {a},{b} does not reduce to zero", (a, b)
                )
    return GroebnerReport(True)


def verify_kernel_syzygy(plan: LayoutPlan, basis: list, kernel: KernelBasis) -> GroebnerReport:
    """Exact recombination check: sum_i v_i (t_i g_{k_i}) must vanish.

    This is only guaranteed for support-closed plans; a failure is a
    property violation, not an input error.
    """
    ring = plan.ring
    for n, v in enumerate(kernel.vectors):
        if len(v) != plan.n_rows:
            return GroebnerReport(False, f"kernel vector {n} has wrong length")
        total = Poly(ring)
        for i, row in enumerate(plan.row_meta):
            c = int(v[i])
            if c:
                total = poly_add_scaled(
                    total, c, poly_mul_mon(row.shift, basis[row.basis_index])
                )
        if not total.is_zero():
            return GroebnerReport(False, f"kernel vector {n} recombines to {total}")
    return GroebnerReport(True)


def groebner_kernel_checks(plan: LayoutPlan, basis: list, m: FieldModulus, seed: int = 0):
    """Left kernels via both engines, each recombined exactly; returns reports."""
    A = csr_from_plan(plan, m)
    reports = []
    dense_kb = left_kernel(A, count=max(1, A.n_rows), seed=seed)
    reports.append(("dense", verify_kernel_syzygy(plan, basis, dense_kb), dense_kb))
    At_dense = A.to_dense().T
    try:
        wk = wiedemann_solve(
            csr_from_dense(At_dense, m), KernelMode.RIGHT_KERNEL, seed=seed
        )
        kb = KernelBasis("left", wk.vectors, wk.dimension_found, wk.seed_trail)
        reports.append(("wiedemann", verify_kernel_syzygy(plan, basis, kb), kb))
    except Exception as exc:  # probabilistic failure is reported, never hidden
        from .errors import ProbabilisticFailureError

        if isinstance(exc, ProbabilisticFailureError):
            reports.append(("wiedemann", GroebnerReport(False, str(exc)), None))
        else:
            raise
    return reports
