"""Term orders and the packed key encoding (order refinement, round trips)."""

import numpy as np
import pytest

from fpgb.errors import ArityMismatchError, CorruptKeyError, DivisionError, LaneOverflowError
from fpgb.fp import FieldModulus
from fpgb.monomials import (
    ORDERS,
    Ring,
    count_monomials,
    key_cmp_rows,
    key_pack_vec,
    key_unpack_vec,
    mon_compare,
    mon_compare_vec,
    mon_div,
    mon_divides,
    mon_key_pack,
    mon_key_unpack,
    mon_lcm,
    mon_mul,
)

M7 = FieldModulus(7)


def ring(n, order="grevlex"):
    return Ring([f"x{i}" for i in range(n)], order, M7)


def enumerate_monomials(n, d):
    """All exponent tuples with total degree <= d."""
    if n == 1:
        return [(e,) for e in range(d + 1)]
    out = []
    for e in range(d + 1):
        for rest in enumerate_monomials(n - 1, d - e):
            out.append((e,) + rest)
    return out


def test_grevlex_examples():
    r = ring(3)  # vars x0 > x1 > x2
    y2 = (0, 2, 0)
    xz = (1, 0, 1)
    assert mon_compare(y2, xz, r) == 1  # y^2 beats x*z at equal degree
    assert mon_compare(xz, y2, r) == -1
    assert mon_compare(y2, y2, r) == 0
    xy2 = (1, 2, 0)
    x2 = (2, 0, 0)
    assert mon_compare(xy2, x2, r) == 1  # degree dominates


def test_compare_is_total_order():
    rng = np.random.default_rng(10)
    for order in ORDERS:
        r = ring(4, order)
        mons = [tuple(int(x) for x in rng.integers(0, 6, 4)) for _ in range(60)]
        for u, v, w in zip(mons, mons[20:], mons[40:]):
            assert mon_compare(u, v, r) == -mon_compare(v, u, r)
            if mon_compare(u, v, r) <= 0 and mon_compare(v, w, r) <= 0:
                assert mon_compare(u, w, r) <= 0


def test_unit_monomial_has_smallest_key():
    for order in ORDERS:
        r = ring(2, order)
        unit_key = np.asarray([mon_key_pack((0, 0), r)], dtype=np.uint64)
        for u in enumerate_monomials(2, 4):
            if u == (0, 0):
                continue
            k = np.asarray([mon_key_pack(u, r)], dtype=np.uint64)
            assert key_cmp_rows(unit_key, k)[0] == -1


@pytest.mark.parametrize("order", ORDERS)
@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_key_order_refines_term_order(order, n):
    rng = np.random.default_rng(n * 1000 + len(order))
    r = ring(n, order)
    u = rng.integers(0, 31, (5000, n))
    v = rng.integers(0, 31, (5000, n))
    ku = key_pack_vec(u, r)
    kv = key_pack_vec(v, r)
    key_cmp = key_cmp_rows(ku, kv)
    direct = mon_compare_vec(u, v, r)
    assert np.array_equal(key_cmp, direct)
    # scalar path agrees with the vector path
    for i in range(0, 200):
        assert mon_compare(tuple(u[i]), tuple(v[i]), r) == direct[i]


def test_pack_unpack_round_trip_exhaustive_n2():
    for order in ORDERS:
        r = ring(2, order)
        mons = enumerate_monomials(2, 6)
        arr = np.array(mons, dtype=np.int64)
        keys = key_pack_vec(arr, r)
        back = key_unpack_vec(keys, r)
        assert np.array_equal(back, arr)
        for u in mons[:20]:
            assert mon_key_unpack(mon_key_pack(u, r), r) == u


def test_pack_unpack_round_trip_random():
    rng = np.random.default_rng(77)
    for n in range(1, 9):
        for order in ORDERS:
            r = ring(n, order)
            arr = rng.integers(0, 1000, (1000, n))
            assert np.array_equal(key_unpack_vec(key_pack_vec(arr, r), r), arr)


def test_corrupt_key_rejected():
    r = ring(2, "grevlex")
    k = np.asarray([mon_key_pack((1, 2), r)], dtype=np.uint64)
    bad = k.copy()
    bad[0, 0] ^= np.uint64(1) << np.uint64(40)  # damage the degree lane
    with pytest.raises(CorruptKeyError):
        key_unpack_vec(bad, r)


def test_lane_overflow_errors():
    r = ring(2)
    with pytest.raises(LaneOverflowError):
        key_pack_vec(np.array([[1 << 16, 0]]), r)
    with pytest.raises(LaneOverflowError):
        mon_mul((1 << 15,), (1 << 15,))


def test_mul_lcm_div_examples():
    x, y = (1, 0), (0, 1)
    assert mon_mul(x, y) == (1, 1)
    assert mon_mul((2, 1), (0, 0)) == (2, 1)
    # (x^2 y) * (x z): three variables
    assert mon_mul((2, 1, 0), (1, 0, 1)) == (3, 1, 1)
    assert sum(mon_mul((2, 1, 0), (1, 0, 1))) == 5
    assert mon_lcm((2, 0), (1, 1)) == (2, 1)
    assert mon_divides((0, 0), (5, 7))
    assert mon_div((2, 1), (1, 1)) == (1, 0)
    with pytest.raises(DivisionError):
        mon_div((1, 0), (0, 1))
    with pytest.raises(ArityMismatchError):
        mon_mul((1,), (1, 2))


def test_lcm_div_properties():
    rng = np.random.default_rng(123)
    for _ in range(300):
        u = tuple(int(x) for x in rng.integers(0, 8, 3))
        v = tuple(int(x) for x in rng.integers(0, 8, 3))
        l = mon_lcm(u, v)
        assert mon_divides(u, l) and mon_divides(v, l)
        assert mon_mul(mon_div(l, u), u) == l


def test_count_monomials_examples():
    assert count_monomials(3, 2) == 10
    for n in range(1, 6):
        assert count_monomials(n, 0) == 1
    assert count_monomials(5, 10) == 3003


def test_count_matches_enumeration():
    for n in range(1, 5):
        for d in range(0, 7):
            assert len(enumerate_monomials(n, d)) == count_monomials(n, d)


def test_variable_count_cap():
    r32 = ring(32)
    assert r32.n_key_words == 9  # (32 + 16*32) bits packed into <= 9 words
    u = tuple(range(32))
    assert mon_key_unpack(mon_key_pack(u, r32), r32) == u
    with pytest.raises(ValueError):
        Ring([f"x{i}" for i in range(33)], "grevlex", M7)
    with pytest.raises(ValueError):
        Ring(["x", "x"], "grevlex", M7)


def test_scalar_pack_equals_vector_pack():
    rng = np.random.default_rng(3141)
    for order in ORDERS:
        for n in (1, 3, 8, 32):
            r = ring(n, order)
            arr = rng.integers(0, 1 << 16, (200, n))
            vec = key_pack_vec(arr, r)
            for i in range(200):
                scalar = mon_key_pack(tuple(int(x) for x in arr[i]), r)
                assert scalar == tuple(int(w) for w in vec[i])
