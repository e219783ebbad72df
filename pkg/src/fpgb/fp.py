"""Exact arithmetic in F_p for odd primes p < 2^31.

Residues are 64-bit unsigned values kept in [0, p) at module boundaries.
Three interchangeable reduction backends are provided:

- ``naive``:      products reduced with the hardware remainder,
- ``barrett``:    reduction by a precomputed reciprocal mu = floor(2^62 / p),
- ``montgomery``: R = 2^32 scaled residues with division-free reduction.

All products of two residues fit in 64 bits (p < 2^31 so a*b < 2^62), which
also bounds the Barrett input regime.  Inner loops may accumulate up to
``lazy_window_k`` unreduced products before a single reduction; the window
is chosen so the running sum never overflows 64 bits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainMismatchError, NonInvertibleError, PreconditionError

_MASK32 = 0xFFFFFFFF
_BARRETT_SHIFT = 62
_BARRETT_LIMIT = 1 << 62
_MONT_R_BITS = 32
_MONT_R = 1 << 32

# Witnesses making Miller-Rabin deterministic for all n < 3.3 * 10^24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


class Backend(enum.Enum):
    NAIVE = "naive"
    BARRETT = "barrett"
    MONTGOMERY = "montgomery"


class Domain(enum.Enum):
    STANDARD = "standard"
    MONTGOMERY = "montgomery"


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for the 64-bit range."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _newton_inv_pow2(p: int, bits: int) -> int:
    """Inverse of odd p modulo 2^bits by Newton iteration on masked words."""
    mask = (1 << bits) - 1
    x = p & mask  # correct modulo 2^3 for odd p
    for _ in range(6):  # doubles precision each step: 3 -> 6 -> ... -> 96 bits
        x = (x * (2 - p * x)) & mask
    return x


class FieldModulus:
    """Immutable modulus object carrying precomputed backend constants.

    Safe to share across threads; all operations taking a FieldModulus are
    pure functions of their inputs.
    """

    __slots__ = (
        "p",
        "backend",
        "barrett_mu",
        "mont_r_bits",
        "mont_pprime",
        "mont_r2",
        "lazy_window_k",
        "_p_u64",
    )

    def __init__(self, p: int, backend: Backend | str = Backend.NAIVE):
        if isinstance(backend, str):
            backend = Backend(backend)
        if not (2 < p < (1 << 31)):
            raise PreconditionError(f"modulus must satisfy 2 < p < 2^31, got {p}")
        if p % 2 == 0 or not is_prime(p):
            raise PreconditionError(f"modulus must be an odd prime, got {p}")
        self.p = p
        self.backend = backend
        self.barrett_mu = _BARRETT_LIMIT // p
        self.mont_r_bits = _MONT_R_BITS
        pinv = _newton_inv_pow2(p, _MONT_R_BITS)
        self.mont_pprime = (-pinv) % _MONT_R
        assert (p * self.mont_pprime) % _MONT_R == _MONT_R - 1
        self.mont_r2 = (_MONT_R * _MONT_R) % p
        self.lazy_window_k = min(16, (1 << 64) // ((p - 1) * (p - 1)))
        assert self.lazy_window_k * (p - 1) * (p - 1) < 1 << 64
        self._p_u64 = np.uint64(p)

    def __repr__(self):
        return f"FieldModulus(p={self.p}, backend={self.backend.value})"

    def __eq__(self, other):
        return (
            isinstance(other, FieldModulus)
            and self.p == other.p
            and self.backend is other.backend
        )

    def __hash__(self):
        return hash((self.p, self.backend))


@dataclass(frozen=True)
class FpElem:
    """A residue plus the domain it lives in."""

    value: int
    domain: Domain = Domain.STANDARD


def _check_same_domain(a: FpElem, b: FpElem):
    if a.domain is not b.domain:
        raise DomainMismatchError(f"mixed domains: {a.domain.value} vs {b.domain.value}")


def fp_add(a: FpElem, b: FpElem, m: FieldModulus) -> FpElem:
    _check_same_domain(a, b)
    r = a.value + b.value
    if r >= m.p:
        r -= m.p
    return FpElem(r, a.domain)


def fp_sub(a: FpElem, b: FpElem, m: FieldModulus) -> FpElem:
    _check_same_domain(a, b)
    r = a.value - b.value
    if r < 0:
        r += m.p
    return FpElem(r, a.domain)


def barrett_reduce(x: int, m: FieldModulus) -> FpElem:
    """Reduce 0 <= x < 2^62 modulo p via reciprocal multiplication.

    The approximate quotient floor(x*mu / 2^62) undershoots the true
    quotient by at most 2, so two select-style corrections suffice.
    """
    if not 0 <= x < _BARRETT_LIMIT:
        raise PreconditionError(f"barrett input out of range: {x}")
    q = (x * m.barrett_mu) >> _BARRETT_SHIFT
    r = x - q * m.p
    r -= m.p if r >= m.p else 0
    r -= m.p if r >= m.p else 0
    assert 0 <= r < m.p
    return FpElem(r)


def mont_mul(a: FpElem, b: FpElem, m: FieldModulus) -> FpElem:
    """Montgomery product: a*b*R^{-1} mod p with one conditional subtraction."""
    if a.domain is not Domain.MONTGOMERY or b.domain is not Domain.MONTGOMERY:
        raise DomainMismatchError("mont_mul expects Montgomery-domain inputs")
    t = a.value * b.value
    mm = (t * m.mont_pprime) & _MASK32
    u = (t + mm * m.p) >> _MONT_R_BITS
    if u >= m.p:
        u -= m.p
    return FpElem(u, Domain.MONTGOMERY)


class ConvertDir(enum.Enum):
    ENTER = "enter"
    LEAVE = "leave"


def mont_convert(a: FpElem, direction: ConvertDir, m: FieldModulus) -> FpElem:
    """Map a residue into or out of the Montgomery domain (a <-> a*R mod p)."""
    if direction is ConvertDir.ENTER:
        if a.domain is not Domain.STANDARD:
            raise DomainMismatchError("enter expects a standard-domain residue")
        return mont_mul(FpElem(a.value, Domain.MONTGOMERY), FpElem(m.mont_r2, Domain.MONTGOMERY), m)
    if a.domain is not Domain.MONTGOMERY:
        raise DomainMismatchError("leave expects a Montgomery-domain residue")
    return FpElem(mont_mul(a, FpElem(1, Domain.MONTGOMERY), m).value, Domain.STANDARD)


def fp_mul(a: FpElem, b: FpElem, m: FieldModulus) -> FpElem:
    """Backend-dispatched product.

    Naive and Barrett expect standard residues; the Montgomery backend
    expects both operands already in the Montgomery domain and returns a
    Montgomery-domain result (a*b*R^{-1} mod p).
    """
    _check_same_domain(a, b)
    if m.backend is Backend.MONTGOMERY:
        return mont_mul(a, b, m)
    if a.domain is not Domain.STANDARD:
        raise DomainMismatchError(f"{m.backend.value} backend expects standard domain")
    if m.backend is Backend.NAIVE:
        return FpElem(a.value * b.value % m.p)
    return barrett_reduce(a.value * b.value, m)


def fp_inv(a: FpElem, m: FieldModulus) -> FpElem:
    """Multiplicative inverse via Fermat; domain-preserving.

    In the Montgomery domain the inverse of aR is a^{-1}R, computed by
    leaving the domain, inverting, and re-entering.
    """
    if a.value == 0:
        raise NonInvertibleError("zero is not invertible")
    if a.domain is Domain.MONTGOMERY:
        std = mont_convert(a, ConvertDir.LEAVE, m)
        return mont_convert(fp_inv(std, m), ConvertDir.ENTER, m)
    return FpElem(pow(a.value, m.p - 2, m.p))


def fma_accumulate(
    acc: int, b: FpElem, c: FpElem, count: int, m: FieldModulus
) -> tuple[int, int]:
    """Add one unreduced product b*c onto a lazy accumulator.

    ``count`` is the number of products already resident in ``acc``; a full
    reduction is forced once the window fills.  Returns (acc', count').
    """
    if count >= m.lazy_window_k:
        raise PreconditionError("lazy window already full")
    _check_same_domain(b, c)
    acc = acc + b.value * c.value
    count += 1
    if count == m.lazy_window_k:
        return acc % m.p, 0
    return acc, count


# ---------------------------------------------------------------------------
# Vector kernels.  Arrays are uint64 residues; callers guarantee values < p
# (standard domain) so every pairwise product stays below 2^62.
# ---------------------------------------------------------------------------


def add_vec(a: np.ndarray, b: np.ndarray, m: FieldModulus) -> np.ndarray:
    r = a + b
    return r - (r >= m._p_u64) * m._p_u64


def sub_vec(a: np.ndarray, b: np.ndarray, m: FieldModulus) -> np.ndarray:
    r = a + m._p_u64 - b
    return r - (r >= m._p_u64) * m._p_u64


def neg_vec(a: np.ndarray, m: FieldModulus) -> np.ndarray:
    return np.where(a == 0, a, m._p_u64 - a)


def naive_mul_vec(a: np.ndarray, b: np.ndarray, m: FieldModulus) -> np.ndarray:
    return (a * b) % m._p_u64


def barrett_reduce_vec(x: np.ndarray, m: FieldModulus) -> np.ndarray:
    """Vector Barrett reduction of values < 2^62.

    The 126-bit product x*mu is assembled from 32-bit halves so the high
    bits needed for the quotient never overflow a 64-bit lane.
    """
    mu = m.barrett_mu
    m1 = np.uint64(mu >> 32)
    m0 = np.uint64(mu & _MASK32)
    x1 = x >> np.uint64(32)
    x0 = x & np.uint64(_MASK32)
    d = x0 * m0
    mid = x1 * m0 + x0 * m1 + (d >> np.uint64(32))
    q = (x1 * m1 << np.uint64(2)) + (mid >> np.uint64(30))
    r = x - q * m._p_u64
    r = r - (r >= m._p_u64) * m._p_u64
    return r - (r >= m._p_u64) * m._p_u64


def mont_mul_vec(a: np.ndarray, b: np.ndarray, m: FieldModulus) -> np.ndarray:
    t = a * b
    mm = ((t & np.uint64(_MASK32)) * np.uint64(m.mont_pprime)) & np.uint64(_MASK32)
    u = (t + mm * m._p_u64) >> np.uint64(_MONT_R_BITS)
    return u - (u >= m._p_u64) * m._p_u64


def mont_enter_vec(a: np.ndarray, m: FieldModulus) -> np.ndarray:
    return mont_mul_vec(a, np.uint64(m.mont_r2), m)


def mont_leave_vec(a: np.ndarray, m: FieldModulus) -> np.ndarray:
    return mont_mul_vec(a, np.uint64(1), m)


def mul_vec(a: np.ndarray, b: np.ndarray, m: FieldModulus) -> np.ndarray:
    """Standard-domain product through the configured backend.

    The Montgomery backend enters the domain, multiplies, and leaves, so
    all three backends agree elementwise on standard residues.
    """
    if m.backend is Backend.NAIVE:
        return naive_mul_vec(a, b, m)
    if m.backend is Backend.BARRETT:
        return barrett_reduce_vec(a * b, m)
    return mont_leave_vec(mont_mul_vec(mont_enter_vec(a, m), mont_enter_vec(b, m), m), m)


def inv_vec(a: np.ndarray, m: FieldModulus) -> np.ndarray:
    """Elementwise inverse (scalar Fermat loop; boundary use only)."""
    out = np.empty_like(a)
    p = m.p
    for i, v in enumerate(a.tolist()):
        if v == 0:
            raise NonInvertibleError("zero is not invertible")
        out[i] = pow(v, p - 2, p)
    return out


class KernelArith:
    """Backend-consistent arithmetic adapter for numeric kernels.

    Values enter the backend's working domain once, inner products stay in
    that domain, and ``leave`` converts back to standard residues at the
    kernel boundary.  ``window`` is the number of unreduced products that
    may be summed before ``reduce_acc`` must run.
    """

    def __init__(self, m: FieldModulus):
        self.m = m
        self.backend = m.backend
        if m.backend is Backend.BARRETT:
            # Barrett input must stay below 2^62, which shrinks the window.
            self.window = max(1, min(m.lazy_window_k, _BARRETT_LIMIT // ((m.p - 1) ** 2)))
        else:
            self.window = m.lazy_window_k

    def enter(self, v: np.ndarray) -> np.ndarray:
        if self.backend is Backend.MONTGOMERY:
            return mont_enter_vec(v, self.m)
        return v

    def leave(self, v: np.ndarray) -> np.ndarray:
        if self.backend is Backend.MONTGOMERY:
            return mont_leave_vec(v, self.m)
        return v

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Reduced in-domain product of in-domain operands."""
        if self.backend is Backend.NAIVE:
            return naive_mul_vec(a, b, self.m)
        if self.backend is Backend.BARRETT:
            return barrett_reduce_vec(a * b, self.m)
        return mont_mul_vec(a, b, self.m)

    def mul_lazy(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Unreduced in-domain product, for windowed accumulation.

        Montgomery products must be reduced per multiply (the division by R
        is part of the product), so only naive/barrett defer reduction.
        """
        if self.backend is Backend.MONTGOMERY:
            return mont_mul_vec(a, b, self.m)
        return a * b

    def reduce_acc(self, v: np.ndarray) -> np.ndarray:
        if self.backend is Backend.BARRETT:
            return barrett_reduce_vec(v, self.m)
        return v % self.m._p_u64

    def lazy_window(self) -> int:
        if self.backend is Backend.MONTGOMERY:
            # products are already reduced; sums of residues overflow at 2^33 terms
            return 1 << 32
        return self.window

    def inv(self, x: int) -> int:
        """In-domain inverse of an in-domain scalar."""
        if self.backend is Backend.MONTGOMERY:
            std = mont_leave_vec(np.uint64(x), self.m)
            r = pow(int(std), self.m.p - 2, self.m.p)
            return int(mont_enter_vec(np.uint64(r), self.m))
        if x == 0:
            raise NonInvertibleError("zero is not invertible")
        return pow(int(x), self.m.p - 2, self.m.p)
