"""Exponent-vector monomials, term orders, and packed comparison keys.

A monomial is a plain tuple of non-negative exponents (one per ring
variable).  For bulk processing every monomial is packed into a fixed-width
big-endian key of 64-bit words whose plain word-lexicographic order refines
the ring's term order exactly:

- graded orders (grevlex, deglex) lead with a 32-bit total-degree lane,
- each exponent occupies a 16-bit lane,
- grevlex tie lanes hold the complemented exponents in reversed variable
  order, so that larger keys are later in the order without a sign flip,
- lex drops the degree lane.

Lanes never straddle word boundaries (all offsets are multiples of 16).
Exponents >= 2^16 or degrees >= 2^32 are hard errors, never silent wraps.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ArityMismatchError, CorruptKeyError, DivisionError, LaneOverflowError
from .fp import FieldModulus

ORDERS = ("grevlex", "deglex", "lex")

_EXP_BITS = 16
_EXP_LIMIT = 1 << _EXP_BITS
_EXP_MASK = _EXP_LIMIT - 1
_DEG_BITS = 32
_DEG_LIMIT = 1 << _DEG_BITS
MAX_VARS = 32

Monomial = tuple  # exponent tuple; degree is sum of entries
MonKey = tuple  # packed words, most significant first


class Ring:
    """Polynomial ring descriptor: variables, term order, coefficient field."""

    __slots__ = (
        "var_names",
        "order",
        "modulus",
        "n_vars",
        "n_key_words",
        "graded",
        "_lane_word",
        "_lane_shift",
        "_key_cache",
    )

    def __init__(self, var_names, order: str, modulus: FieldModulus):
        names = tuple(var_names)
        if not 1 <= len(names) <= MAX_VARS:
            raise ValueError(f"need 1..{MAX_VARS} variables, got {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError("variable names must be distinct")
        if order not in ORDERS:
            raise ValueError(f"unknown order {order!r}; expected one of {ORDERS}")
        self.var_names = names
        self.order = order
        self.modulus = modulus
        self.n_vars = len(names)
        self.graded = order in ("grevlex", "deglex")
        head = _DEG_BITS if self.graded else 0
        total_bits = head + _EXP_BITS * self.n_vars
        self.n_key_words = (total_bits + 63) // 64
        # per-exponent-lane placement (lane i is the i-th 16-bit slot after
        # the optional degree lane)
        offs = [head + _EXP_BITS * i for i in range(self.n_vars)]
        self._lane_word = np.array([o // 64 for o in offs], dtype=np.int64)
        self._lane_shift = np.array([64 - (o % 64) - _EXP_BITS for o in offs], dtype=np.uint64)
        self._key_cache: dict = {}

    def sort_key(self, u: Monomial) -> MonKey:
        """Packed key with per-ring memoization (hot path of the poly layer)."""
        k = self._key_cache.get(u)
        if k is None:
            k = mon_key_pack(u, self)
            self._key_cache[u] = k
        return k

    def one(self) -> Monomial:
        return (0,) * self.n_vars

    def var(self, i: int) -> Monomial:
        e = [0] * self.n_vars
        e[i] = 1
        return tuple(e)

    def __repr__(self):
        return f"Ring(vars={self.var_names}, order={self.order}, p={self.modulus.p})"


def _check_arity(u: Monomial, ring: Ring):
    if len(u) != ring.n_vars:
        raise ArityMismatchError(f"expected {ring.n_vars} exponents, got {len(u)}")


def mon_degree(u: Monomial) -> int:
    return sum(u)


def mon_compare(u: Monomial, v: Monomial, ring: Ring) -> int:
    """Direct term-order comparison: -1 if u < v, 0 if equal, +1 if u > v.

    This is the reference rule the packed keys are tested against; it does
    not go through the key encoding.
    """
    _check_arity(u, ring)
    _check_arity(v, ring)
    if ring.graded:
        du, dv = sum(u), sum(v)
        if du != dv:
            return -1 if du < dv else 1
    if ring.order == "grevlex":
        for i in range(ring.n_vars - 1, -1, -1):
            if u[i] != v[i]:
                # the monomial with the smaller rightmost differing exponent wins
                return 1 if u[i] < v[i] else -1
        return 0
    for i in range(ring.n_vars):
        if u[i] != v[i]:
            return -1 if u[i] < v[i] else 1
    return 0


def _tie_lanes(exps: np.ndarray, ring: Ring) -> np.ndarray:
    if ring.order == "grevlex":
        return _EXP_MASK - exps[:, ::-1]
    return exps


def key_pack_vec(exps: np.ndarray, ring: Ring) -> np.ndarray:
    """Pack an (N, n_vars) exponent matrix into (N, n_key_words) uint64 keys."""
    exps = np.asarray(exps)
    if exps.ndim != 2 or exps.shape[1] != ring.n_vars:
        raise ArityMismatchError(f"expected shape (N, {ring.n_vars}), got {exps.shape}")
    if exps.size and (exps.min() < 0 or exps.max() >= _EXP_LIMIT):
        raise LaneOverflowError("exponent does not fit a 16-bit lane")
    e = exps.astype(np.uint64)
    deg = e.sum(axis=1)
    if e.size and deg.max() >= _DEG_LIMIT:
        raise LaneOverflowError("total degree does not fit the 32-bit degree lane")
    words = np.zeros((e.shape[0], ring.n_key_words), dtype=np.uint64)
    if ring.graded:
        words[:, 0] |= deg << np.uint64(32)
    lanes = _tie_lanes(e, ring).astype(np.uint64)
    for i in range(ring.n_vars):
        words[:, ring._lane_word[i]] |= lanes[:, i] << ring._lane_shift[i]
    return words


def key_unpack_vec(keys: np.ndarray, ring: Ring) -> np.ndarray:
    """Inverse of key_pack_vec; validates lane consistency."""
    keys = np.asarray(keys, dtype=np.uint64)
    if keys.ndim != 2 or keys.shape[1] != ring.n_key_words:
        raise CorruptKeyError(f"expected shape (N, {ring.n_key_words}), got {keys.shape}")
    lanes = np.empty((keys.shape[0], ring.n_vars), dtype=np.uint64)
    for i in range(ring.n_vars):
        lanes[:, i] = (keys[:, ring._lane_word[i]] >> ring._lane_shift[i]) & np.uint64(_EXP_MASK)
    if ring.order == "grevlex":
        exps = (_EXP_MASK - lanes)[:, ::-1]
    else:
        exps = lanes
    # reject keys with inconsistent degree lanes or dirty padding bits
    if keys.size and not np.array_equal(key_pack_vec(exps, ring), keys):
        raise CorruptKeyError("key lanes are internally inconsistent")
    return exps.astype(np.int64)


def mon_key_pack(u: Monomial, ring: Ring) -> MonKey:
    """Scalar pack: plain-integer path, bit-identical to key_pack_vec."""
    _check_arity(u, ring)
    acc = 0
    bits = 0
    if ring.graded:
        deg = 0
        for e in u:
            if not 0 <= e < _EXP_LIMIT:
                raise LaneOverflowError(f"exponent {e} does not fit a 16-bit lane")
            deg += e
        if deg >= _DEG_LIMIT:
            raise LaneOverflowError("total degree does not fit the 32-bit degree lane")
        acc = deg
        bits = _DEG_BITS
        lanes = tuple(_EXP_MASK - e for e in reversed(u)) if ring.order == "grevlex" else u
    else:
        for e in u:
            if not 0 <= e < _EXP_LIMIT:
                raise LaneOverflowError(f"exponent {e} does not fit a 16-bit lane")
        lanes = u
    for lane in lanes:
        acc = (acc << _EXP_BITS) | lane
        bits += _EXP_BITS
    acc <<= ring.n_key_words * 64 - bits
    mask = (1 << 64) - 1
    w = ring.n_key_words
    return tuple((acc >> (64 * (w - 1 - i))) & mask for i in range(w))


def mon_key_unpack(k: MonKey, ring: Ring) -> Monomial:
    arr = np.asarray([k], dtype=np.uint64)
    return tuple(int(e) for e in key_unpack_vec(arr, ring)[0])


def mon_compare_vec(u: np.ndarray, v: np.ndarray, ring: Ring) -> np.ndarray:
    """Vectorized direct term-order comparison of row-aligned exponent matrices."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    diff = u - v
    nz = diff != 0
    any_nz = nz.any(axis=1)
    if ring.order == "grevlex":
        idx = ring.n_vars - 1 - np.argmax(nz[:, ::-1], axis=1)
        at = diff[np.arange(len(diff)), idx]
        tie = np.where(any_nz, -np.sign(at), 0)
    else:
        idx = np.argmax(nz, axis=1)
        at = diff[np.arange(len(diff)), idx]
        tie = np.where(any_nz, np.sign(at), 0)
    if ring.graded:
        dd = np.sign(u.sum(axis=1) - v.sum(axis=1))
        return np.where(dd != 0, dd, tie).astype(np.int8)
    return tie.astype(np.int8)


def mon_mul(u: Monomial, v: Monomial) -> Monomial:
    if len(u) != len(v):
        raise ArityMismatchError("arity mismatch in monomial product")
    w = tuple(a + b for a, b in zip(u, v))
    if any(e >= _EXP_LIMIT for e in w) or sum(w) >= _DEG_LIMIT:
        raise LaneOverflowError("monomial product overflows key lanes")
    return w


def mon_lcm(u: Monomial, v: Monomial) -> Monomial:
    if len(u) != len(v):
        raise ArityMismatchError("arity mismatch in lcm")
    return tuple(max(a, b) for a, b in zip(u, v))


def mon_divides(u: Monomial, v: Monomial) -> bool:
    """True iff u divides v componentwise."""
    if len(u) != len(v):
        raise ArityMismatchError("arity mismatch in divisibility test")
    return all(a <= b for a, b in zip(u, v))


def mon_div(u: Monomial, v: Monomial) -> Monomial:
    """Exact quotient u / v; raises unless v divides u."""
    if len(u) != len(v):
        raise ArityMismatchError("arity mismatch in monomial division")
    if not mon_divides(v, u):
        raise DivisionError(f"{v} does not divide {u}")
    return tuple(a - b for a, b in zip(u, v))


def count_monomials(n: int, d: int):
    """Number of monomials in n variables of total degree <= d: C(n+d, d)."""
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    return math.comb(n + d, d)


def key_cmp_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lexicographic comparison of aligned key-word rows: -1/0/+1 per row."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    out = np.zeros(a.shape[0], dtype=np.int8)
    for w in range(a.shape[1]):
        undecided = out == 0
        if not undecided.any():
            break
        aw, bw = a[:, w], b[:, w]
        out = np.where(undecided & (aw < bw), np.int8(-1), out)
        out = np.where(undecided & (aw > bw), np.int8(1), out)
    return out


def mon_format(u: Monomial, ring: Ring) -> str:
    """Render as the parser grammar expects: x^2*y style, '1' for the unit."""
    parts = []
    for name, e in zip(ring.var_names, u):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"
