import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cattree.machine import CatalyticState, tape_from_mode
from cattree.modmath import PrimeBasis, crt_combine
from cattree.mv import build_family
from cattree.onelevel import (
    DirectOracle,
    crt_unit_table,
    one_level_call_count,
    one_level_update,
    pack_value,
    paired_inner_products,
    sentinel_poly_monomial,
    unpack_value,
    value_coord_count,
    value_row,
    w_matrix,
)

B3 = PrimeBasis((3,))
B15 = PrimeBasis((3, 5))


# -- sentinel monomials ------------------------------------------------------


@pytest.mark.parametrize(
    "p,g1,g2,alpha,beta",
    [(3, 0, 0, -1, 0), (3, 1, 1, 2, 1), (5, 0, 3, -1, 3)],
)
def test_sentinel_known_values(p, g1, g2, alpha, beta):
    assert sentinel_poly_monomial(p, g1, g2) == (alpha, beta)


def _difference_coeff(p, g1, g2, beta):
    """Coefficient of X^beta in sum (-1)^(b+c) X^((g1+b)(g2+c) mod p)."""
    acc = 0
    for b in (0, 1):
        for c in (0, 1):
            if (g1 + b) * (g2 + c) % p == beta:
                acc += (-1) ** (b + c)
    return acc % p


@pytest.mark.parametrize("p", [3, 5, 7])
def test_sentinel_is_first_nonzero_coefficient(p):
    for g1 in range(p):
        for g2 in range(p):
            alpha, beta = sentinel_poly_monomial(p, g1, g2)
            assert alpha % p != 0
            assert _difference_coeff(p, g1, g2, beta) == alpha % p
            for exp in range(beta):
                assert _difference_coeff(p, g1, g2, exp) == 0
            assert alpha in (-2, -1, 1, 2)


@pytest.mark.parametrize("p", [3, 5])
def test_mask_sum_identity(p):
    """The signed indicator sum over (b, c) masks picks out exactly the
    diagonal inner-product pattern, with the sentinel coefficient."""
    for g1 in range(p):
        for g2 in range(p):
            alpha, beta = sentinel_poly_monomial(p, g1, g2)
            for e1 in (0, 1):
                for e2 in (0, 1):
                    acc = 0
                    for b in (0, 1):
                        for c in (0, 1):
                            if (g1 + b * e1) * (g2 + c * e2) % p == beta:
                                acc += (-1) ** (b + c)
                    expect = alpha if (e1 and e2) else 0
                    assert acc % p == expect % p, (g1, g2, e1, e2)


def test_crt_unit_table():
    units = crt_unit_table(B15)
    assert units[0] == 0
    assert units[0b11] == 1
    assert units[0b01] == crt_combine([1, 0], B15)
    assert units[0b10] == crt_combine([0, 1], B15)


# -- value packing -----------------------------------------------------------


def test_value_coord_count():
    assert value_coord_count(2, 15) == 1  # 2 bits into a 3-bit chunk
    assert value_coord_count(2, 3) == 2
    assert value_coord_count(7, 15) == 3


@pytest.mark.parametrize("ell,m", [(1, 3), (2, 3), (2, 15), (5, 15), (7, 15)])
def test_pack_unpack_round_trip(ell, m):
    for val in range(2**ell):
        coords = pack_value(val, ell, m)
        assert len(coords) == value_coord_count(ell, m)
        assert all(0 <= c < m for c in coords)
        assert unpack_value(coords, ell, m) == val


def test_pack_range_check():
    with pytest.raises(ValueError):
        pack_value(4, 2, 15)


def test_value_row_placement():
    row = value_row(3, 2, 15, 9)
    assert row[:8] == [0] * 8 and row[8] == 3
    rows = w_matrix("value", build_family(2, B15), 2)
    assert rows.shape == (4, 65)
    assert list(rows[3][-1:]) == [3]


def test_w_matrix_bad_selector():
    with pytest.raises(ValueError):
        w_matrix("w", build_family(1, B3), 1)


# -- paired inner products ---------------------------------------------------


@pytest.mark.parametrize("basis", [B3, B15])
def test_paired_inner_products(basis):
    m = basis.modulus
    fam = build_family(2, basis)
    rng = random.Random(7)
    for trial in range(10):
        state = CatalyticState(
            basis, fam.dim, tape_from_mode("seeded-random", fam.dim, m, trial)
        )
        a, b = rng.randrange(4), rng.randrange(4)
        want_g1 = int(state.x @ fam.v_matrix[a]) % m
        want_g2 = int(state.y @ fam.v_matrix[b]) % m
        g1, g2 = paired_inner_products(state, DirectOracle(state, fam, a, b))
        assert (g1, g2) == (want_g1, want_g2)
        assert state.assert_restored()[0]
        assert state.oracle_calls == 4


# -- the one-level algorithm --------------------------------------------------


def _tapes(d, m, count):
    yield tape_from_mode("zeros", d, m)
    yield tape_from_mode("max", d, m)
    yield tape_from_mode("alternating", d, m)
    for seed in range(count):
        yield tape_from_mode("seeded-random", d, m, seed)


@pytest.mark.parametrize("basis", [B3, B15])
@pytest.mark.parametrize("wfam", ["u", "v", "value"])
def test_one_level_exact_update(basis, wfam):
    m = basis.modulus
    ell = 2
    fam = build_family(ell, basis)
    rng = random.Random(13)
    w_rows = w_matrix(wfam, fam, ell)
    for tape in _tapes(fam.dim, m, 8):
        state = CatalyticState(basis, fam.dim, tape)
        a, b = rng.randrange(4), rng.randrange(4)
        f = np.array(
            [[rng.randrange(4) for _ in range(4)] for _ in range(4)], dtype=np.int64
        )
        gamma_star = rng.choice([1, m - 1, 2])
        z0 = state.z.copy()
        one_level_update(f, gamma_star, wfam, state, DirectOracle(state, fam, a, b), fam)
        assert state.oracle_calls == one_level_call_count(basis.t)
        assert state.assert_restored(("x", "y"))[0]
        want = (z0 + gamma_star * w_rows[f[a, b]]) % m
        assert np.array_equal(state.z, want)


def test_one_level_streaming_agrees():
    fam = build_family(1, B15)
    f = np.array([[1, 0], [0, 1]], dtype=np.int64)
    results = []
    for mode in ("table", "streaming"):
        state = CatalyticState(
            B15, fam.dim, tape_from_mode("seeded-random", fam.dim, 15, 4)
        )
        one_level_update(f, 1, "u", state, DirectOracle(state, fam, 1, 0), fam, mode=mode)
        results.append(state.z.copy())
    assert np.array_equal(results[0], results[1])


def test_one_level_rejects_bad_table():
    fam = build_family(1, B3)
    state = CatalyticState(B3, fam.dim)
    bad = np.zeros((2, 3), dtype=np.int64)
    with pytest.raises(ValueError):
        one_level_update(bad, 1, "u", state, DirectOracle(state, fam, 0, 0), fam)


def test_one_level_ledger_is_balanced():
    fam = build_family(2, B15)
    state = CatalyticState(B15, fam.dim)
    f = np.zeros((4, 4), dtype=np.int64)
    one_level_update(f, 1, "u", state, DirectOracle(state, fam, 0, 0), fam)
    assert state.ledger.current_free_bits == 0
    assert state.ledger.peak_free_bits > 0


@given(st.integers(min_value=0, max_value=2**31))
@settings(max_examples=20, deadline=None)
def test_one_level_restores_xy_property(seed):
    basis = B3
    fam = build_family(1, basis)
    rng = random.Random(seed)
    state = CatalyticState(
        basis, fam.dim, tape_from_mode("seeded-random", fam.dim, 3, seed)
    )
    f = np.array([[rng.randrange(2) for _ in range(2)] for _ in range(2)], dtype=np.int64)
    one_level_update(
        f, rng.randrange(1, 3), "v", state, DirectOracle(state, fam, rng.randrange(2), rng.randrange(2)), fam
    )
    assert state.assert_restored(("x", "y"))[0]
