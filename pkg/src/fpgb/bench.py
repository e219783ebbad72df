"""Pipeline driver, benchmark protocol, microbenchmarks, invariant verifier.

A pipeline run produces a BenchReport (instance descriptor, per-batch shape
counters and stage timings, totals, result digest) plus the reduced basis
text.  Stage timings split the work into the three kernels the engine is
built around: dictionary build (key emission + sort + unique), row assembly
(dictionary join), and the numeric core (elimination or kernel solve).

Reports serialize two ways: a human-readable table and a flat
``key=value`` form for scripts.  Digests are sha256 over the canonical
basis text and must be identical for every worker-lane count.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bulk import merge_join_index, radix_pass_count, radix_sort, unique_sorted
from .errors import PreconditionError, PropertyViolationError
from .fp import Backend, FieldModulus, KernelArith
from .groebner import (
    F4Config,
    GroebnerState,
    buchberger_reference,
    f4_step,
    groebner_kernel_checks,
    is_groebner,
    reduce_basis,
    update_pairs,
)
from .monomials import mon_divides, key_unpack_vec
from .polynomials import poly_monic, poly_mul_mon
from .symbolic import decode_row, plan_stats, row_lead_cols
from .systems import format_system, gen_cyclic, gen_katsura, gen_random_quadratic


@dataclass
class PipelineConfig:
    engine: str = "f4"  # f4 | buchberger
    numeric: str = "psge"  # psge | wiedemann | dense
    backend: str = "naive"  # naive | barrett | montgomery
    panel_width: int = 256
    block_width: int = 4
    seed: int = 0
    workers: int = 1
    max_steps: int = 10_000

    def f4_config(self) -> F4Config:
        return F4Config(
            numeric=self.numeric,
            panel_width=self.panel_width,
            block_width=self.block_width,
            seed=self.seed,
            workers=self.workers,
            max_steps=self.max_steps,
        )


@dataclass
class BenchReport:
    instance: dict
    config: dict
    environment: dict
    batches: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    digest: str = ""

    def flat_items(self):
        yield "schema", "fpgb-bench-v1"
        for k, v in sorted(self.instance.items()):
            yield f"instance.{k}", v
        for k, v in sorted(self.config.items()):
            yield f"config.{k}", v
        for k, v in sorted(self.environment.items()):
            yield f"environment.{k}", v
        for i, b in enumerate(self.batches):
            for k in (
                "degree", "r", "N", "M", "nnz", "rank", "new_polys",
                "zero_reductions", "closure_rounds",
            ):
                yield f"batch.{i}.{k}", b[k]
            for k in ("dict_build", "row_assemble", "numeric_core"):
                yield f"batch.{i}.timings_ns.{k}", b["timings_ns"][k]
            if "fill_generated" in b["timings_ns"]:
                yield f"batch.{i}.fill_generated", b["timings_ns"]["fill_generated"]
        for k, v in sorted(self.totals.items()):
            yield f"totals.{k}", v
        yield "digest", self.digest

    def to_flat_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.flat_items()) + "\n"

    def to_text(self) -> str:
        lines = ["fpgb bench report", ""]
        lines.append("instance:   " + " ".join(f"{k}={v}" for k, v in sorted(self.instance.items())))
        lines.append("config:     " + " ".join(f"{k}={v}" for k, v in sorted(self.config.items())))
        lines.append("environment: " + " ".join(f"{k}={v}" for k, v in sorted(self.environment.items())))
        lines.append("")
        if self.batches:
            hdr = (
                "batch degree     r     N     M   nnz  rank  new zero  "
                "dict_build_ns row_assemble_ns numeric_core_ns"
            )
            lines.append(hdr)
            for i, b in enumerate(self.batches):
                t = b["timings_ns"]
                lines.append(
                    f"{i:5d} {b['degree']:6d} {b['r']:5d} {b['N']:5d} {b['M']:5d} "
                    f"{b['nnz']:5d} {b['rank']:5d} {b['new_polys']:4d} {b['zero_reductions']:4d}  "
                    f"{t['dict_build']:13d} {t['row_assemble']:15d} {t['numeric_core']:15d}"
                )
            lines.append("")
        lines.append("totals:     " + " ".join(f"{k}={v}" for k, v in sorted(self.totals.items())))
        lines.append(f"digest:     {self.digest}")
        return "\n".join(lines) + "\n"


def basis_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def run_pipeline(ring, polys, config: PipelineConfig, instance: dict | None = None):
    """Run the configured engine; returns (report, basis_text, basis)."""
    if config.engine not in ("f4", "buchberger"):
        raise PreconditionError(f"unknown engine {config.engine!r}")
    if config.numeric not in ("psge", "dense", "wiedemann"):
        raise PreconditionError(f"unknown numeric engine {config.numeric!r}")
    t_start = time.monotonic_ns()
    batches = []
    if config.engine == "f4":
        state = GroebnerState(ring)
        f4cfg = config.f4_config()
        for f in polys:
            if f.is_zero():
                raise PreconditionError("zero polynomial in input system")
        for f in polys:
            update_pairs(state, poly_monic(f))
        steps = 0
        while state.pairs:
            if steps >= config.max_steps:
                from .errors import NonterminationError

                raise NonterminationError(f"f4 exceeded {config.max_steps} batches")
            plan, ech, _ = f4_step(state, f4cfg)
            steps += 1
            st = state.stats[-1]
            if st.M != plan_stats(plan)["M"] or st.M != plan.counters.keys_emitted:
                raise PropertyViolationError("batch M disagrees with instrumented key count")
            batches.append(
                {
                    "degree": st.degree,
                    "r": st.r,
                    "N": st.N,
                    "M": st.M,
                    "nnz": st.nnz,
                    "rank": st.rank,
                    "new_polys": st.new_polys,
                    "zero_reductions": st.zero_reductions,
                    "closure_rounds": st.closure_rounds,
                    "timings_ns": dict(st.timings_ns),
                }
            )
        basis = reduce_basis(state.basis, ring)
    else:
        basis = buchberger_reference(polys, ring, config.max_steps)
    total_ns = time.monotonic_ns() - t_start

    basis_text = format_system(ring, basis)
    totals = {
        "batches": len(batches),
        "basis_size": len(basis),
        "time_total_ns": total_ns,
        "M_total": sum(b["M"] for b in batches),
        "nnz_total": sum(b["nnz"] for b in batches),
        "dict_build_ns": sum(b["timings_ns"]["dict_build"] for b in batches),
        "row_assemble_ns": sum(b["timings_ns"]["row_assemble"] for b in batches),
        "numeric_core_ns": sum(b["timings_ns"]["numeric_core"] for b in batches),
    }
    if config.engine == "f4" and config.numeric in ("psge", "wiedemann"):
        totals["fill_generated"] = sum(
            b["timings_ns"].get("fill_generated", 0) for b in batches
        )
    report = BenchReport(
        instance=dict(instance or {}),
        config={
            "engine": config.engine,
            "numeric": config.numeric,
            "backend": config.backend,
            "panel_width": config.panel_width,
            "block_width": config.block_width,
            "seed": config.seed,
            "workers": config.workers,
        },
        environment={"version": __version__, "worker_lanes": config.workers},
        batches=batches,
        totals=totals,
        digest=basis_digest(basis_text),
    )
    return report, basis_text, basis


def make_instance(family: str, config: PipelineConfig, **params):
    """Instantiate a named benchmark family."""
    backend = Backend(config.backend)
    if family == "cyclic":
        ring, polys = gen_cyclic(params["n"], params["p"], backend)
        desc = {"family": "cyclic", "n": params["n"]}
    elif family == "katsura":
        ring, polys = gen_katsura(params["n"], params["p"], backend)
        desc = {"family": "katsura", "n": params["n"]}
    elif family == "random":
        ring, polys = gen_random_quadratic(
            params["n"], params["m"], params["density"], params["seed"], params["p"], backend
        )
        desc = {
            "family": "random",
            "n": params["n"],
            "m": params["m"],
            "density": params["density"],
        }
    else:
        raise PreconditionError(f"unknown family {family!r}")
    desc.update({"p": params["p"], "order": ring.order, "seed": params.get("seed", 0)})
    return ring, polys, desc


# ---------------------------------------------------------------------------
# Microbenchmarks for the three timed kernels
# ---------------------------------------------------------------------------


def _synth_keys(rng, size: int, duplicate_rate: float, words: int = 2):
    n_unique = max(1, int(round(size * (1.0 - duplicate_rate))))
    pool = rng.integers(0, 1 << 48, (n_unique, words)).astype(np.uint64)
    picks = rng.integers(0, n_unique, size)
    return pool[picks]


def microbench(kind: str, size: int, duplicate_rate: float = 0.5, seed: int = 0) -> dict:
    """Time one isolated primitive on synthetic input, after checking it.

    Correctness of the primitive's output is asserted against an oracle
    before any throughput number is reported.
    """
    if size < 1:
        raise PreconditionError("size must be >= 1")
    rng = np.random.default_rng(seed)
    out = {"kind": kind, "size": size, "seed": seed}
    if kind == "dict_build":
        keys = _synth_keys(rng, size, duplicate_rate)
        srt, _ = radix_sort(keys)
        uniq, _ = unique_sorted(srt, check=False)
        want = sorted({tuple(k) for k in keys.tolist()})
        assert [tuple(k) for k in uniq.tolist()] == want
        t0 = time.monotonic_ns()
        srt, _ = radix_sort(keys)
        uniq, _ = unique_sorted(srt, check=False)
        dt = time.monotonic_ns() - t0
        out.update(
            duplicate_rate=duplicate_rate,
            unique_out=len(uniq),
            radix_passes=radix_pass_count(keys.shape[1]),
            keys_total=size,
            keys_per_s=size / max(dt, 1) * 1e9,
            bytes_per_s=keys.nbytes / max(dt, 1) * 1e9,
            elapsed_ns=dt,
        )
    elif kind == "row_assemble":
        dic, _ = unique_sorted(radix_sort(_synth_keys(rng, size, 0.0))[0], check=False)
        # length-bucketed row segments drawn from the dictionary
        lens = np.clip(rng.geometric(0.2, max(1, size // 16)), 1, 64)
        picks = np.sort(rng.integers(0, len(dic), int(lens.sum())))
        seg = dic[picks]
        got = merge_join_index(seg, dic, check=False)
        assert np.array_equal(dic[got], seg)
        t0 = time.monotonic_ns()
        merge_join_index(seg, dic, check=False)
        dt = time.monotonic_ns() - t0
        bucket_counts = np.bincount(np.minimum(lens, 64))
        busiest = int(bucket_counts.max())
        out.update(
            rows=len(lens),
            joins_total=len(seg),
            joins_per_s=len(seg) / max(dt, 1) * 1e9,
            bucket_imbalance=busiest / max(1.0, bucket_counts[bucket_counts > 0].mean()),
            elapsed_ns=dt,
        )
    elif kind == "mod_fma":
        p = 2147483629
        a = rng.integers(0, p, size, dtype=np.uint64)
        b = rng.integers(0, p, size, dtype=np.uint64)
        acc = rng.integers(0, p, size, dtype=np.uint64)
        want = (acc + a * b) % np.uint64(p)
        for backend in Backend:
            m = FieldModulus(p, backend)
            ar = KernelArith(m)
            da, db, dacc = ar.enter(a), ar.enter(b), ar.enter(acc)
            got = ar.leave((dacc + ar.mul(da, db)) % np.uint64(p))
            assert np.array_equal(got, want), f"{backend} disagrees with naive"
            t0 = time.monotonic_ns()
            _ = (dacc + ar.mul(da, db)) % np.uint64(p)
            dt = time.monotonic_ns() - t0
            out[f"updates_per_s.{backend.value}"] = size / max(dt, 1) * 1e9
            out[f"elapsed_ns.{backend.value}"] = dt
    else:
        raise PreconditionError(f"unknown microbench kind {kind!r}")
    return out


# ---------------------------------------------------------------------------
# Invariant verification on a concrete instance
# ---------------------------------------------------------------------------


def verify_instance(ring, polys, config: PipelineConfig):
    """Run the structural/algebraic invariant suites over one instance.

    Returns a list of (check, ok, detail); any False entry is a property
    violation.  Covers: plan structure (race-freedom partition), dictionary
    against the naive support-union oracle, row decode against the exact
    shift oracle, closure soundness, kernel-syzygy on both kernel engines,
    key-count instrumentation, digest stability across worker counts, and
    engine agreement (batched vs scalar oracle).
    """
    checks = []

    def record(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    state = GroebnerState(ring)
    for f in polys:
        update_pairs(state, poly_monic(f))
    f4cfg = config.f4_config()
    while state.pairs:
        basis_before = list(state.basis)
        plan, ech, _ = f4_step(state, f4cfg)
        try:
            plan.validate()
            record("plan_structure", True)
        except PropertyViolationError as exc:
            record("plan_structure", False, str(exc))
        # dictionary oracle: sorted set of shifted supports
        support = set()
        for row in plan.row_meta:
            shifted = poly_mul_mon(row.shift, basis_before[row.basis_index])
            support.update(e for e, _ in shifted.terms)
        got = {tuple(int(e) for e in r) for r in key_unpack_vec(plan.dict_keys, ring)}
        record("dictionary_oracle", got == support, f"{len(got)} vs {len(support)} monomials")
        # decode oracle
        ok = True
        for i, row in enumerate(plan.row_meta):
            want = poly_mul_mon(row.shift, basis_before[row.basis_index])
            if decode_row(plan, i).terms != want.terms:
                ok = False
                break
        record("row_decode_oracle", ok)
        # closure soundness: covered dictionary monomials lead some row
        lead_cols = set(row_lead_cols(plan).tolist())
        exps = key_unpack_vec(plan.dict_keys, ring)
        sound = True
        for j in range(len(exps)):
            mono = tuple(int(x) for x in exps[j])
            if any(mon_divides(g.lm(), mono) for g in basis_before):
                if j not in lead_cols:
                    sound = False
                    break
        record("closure_soundness", sound)
        # kernel syzygies via both engines
        for engine, report, _ in groebner_kernel_checks(plan, basis_before, ring.modulus, config.seed):
            record(f"kernel_syzygy_{engine}", report.ok, report.detail)
        record(
            "key_instrumentation",
            plan.counters.keys_emitted == plan.counters.M
            and plan.counters.keys_generated_total >= plan.counters.M,
        )
    gb_f4 = reduce_basis(state.basis, ring)
    gb_oracle = buchberger_reference(polys, ring, config.max_steps)
    record(
        "engine_agreement",
        [f.terms for f in gb_f4] == [f.terms for f in gb_oracle],
    )
    record("buchberger_criterion", is_groebner(gb_f4, ring).ok)
    digests = set()
    for workers in (1, 2, 4, 8):
        cfg = PipelineConfig(**{**config.__dict__, "workers": workers})
        rep, _, _ = run_pipeline(ring, polys, cfg)
        digests.add(rep.digest)
    record("digest_worker_stability", len(digests) == 1, f"{len(digests)} distinct digests")
    return checks
