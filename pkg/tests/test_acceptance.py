"""Acceptance gate: one test per criterion, exact comparisons throughout.

Criteria 4, 5 and 6 share one grid of full evaluations (cached per session)
so the measured call counts and space peaks come from the same runs that
established correctness.
"""

import itertools
import math
import random
import time
from functools import lru_cache

import numpy as np
import pytest

from cattree.cir import cir_retrieve, cm_cir, make_pir, mv_cir, pir_privacy_check, pir_retrieve
from cattree.machine import CatalyticState, decode_tape, encode_tape, slot_width, tape_from_mode
from cattree.modmath import PrimeBasis, canonical_set
from cattree.mv import build_family, combined_poly, select_params, verify_family, weight_indicator_poly
from cattree.onelevel import DirectOracle, one_level_call_count, one_level_update, w_matrix
from cattree.tree import analytic_call_count, eval_bruteforce, eval_catalytic, gen_random_instance, reduce_fanin

B3 = PrimeBasis((3,))
B15 = PrimeBasis((3, 5))

INSTANCES_PER_CELL = 50
TAPES_PER_INSTANCE = 3


def _report(n, text):
    print(f"criterion {n:2d}: PASS — {text}")


# -- criterion 1: matching-vector axioms ---------------------------------------


def test_criterion_01_mv_axioms():
    t0 = time.perf_counter()
    total = 0
    for basis in (B15, B3):
        for ell in (1, 2):
            fam = build_family(ell, basis)
            report = verify_family(fam, mode="exhaustive")
            assert report.ok, report.violation
            total += report.pairs_checked
    elapsed = time.perf_counter() - t0
    assert elapsed < 10
    _report(1, f"{total} pairs exhaustively checked in {elapsed:.1f}s")


# -- criterion 2: weight-indicator and combined polynomials --------------------


def test_criterion_02_polynomials():
    t0 = time.perf_counter()
    cases = [(3, 1, 2, 6), (3, 2, 3, 8), (5, 1, 2, 8), (3, 1, 1, 10)]
    points = 0
    for p, e, w, n in cases:
        f = weight_indicator_poly(p, e, w, n)
        assert f.degree() <= p**e - 1
        for x in itertools.product((0, 1), repeat=n):
            assert f.evaluate01(x) == (0 if sum(x) % p**e == w % p**e else 1)
            points += 1
    for basis, ell in [(B3, 1), (B15, 1), (B15, 2)]:
        params = select_params(ell, basis)
        g = combined_poly(params)
        canon = canonical_set(basis)
        pe = [p**e for p, e in zip(basis.primes, params.exponents)]
        for x in itertools.product((0, 1), repeat=params.h_sets):
            got = g.evaluate01(x)
            for p, q in zip(basis.primes, pe):
                assert got % p == (0 if sum(x) % q == params.w % q else 1)
            if sum(x) == params.w:
                assert got == 0
            elif sum(x) < params.w:
                assert got in canon
            points += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 10
    _report(2, f"{points} 0/1 points verified in {elapsed:.1f}s")


# -- criterion 3: one-level algorithm ------------------------------------------


def test_criterion_03_one_level():
    t0 = time.perf_counter()
    ell = 2
    runs = 0
    for basis in (B3, B15):
        m = basis.modulus
        fam = build_family(ell, basis)
        w_rows = w_matrix("u", fam, ell)
        rng = random.Random(1)
        tapes = [
            tape_from_mode("zeros", fam.dim, m),
            tape_from_mode("max", fam.dim, m),
            tape_from_mode("alternating", fam.dim, m),
        ] + [tape_from_mode("seeded-random", fam.dim, m, s) for s in range(100)]
        for tape in tapes:
            state = CatalyticState(basis, fam.dim, tape)
            a, b = rng.randrange(4), rng.randrange(4)
            f = np.array(
                [[rng.randrange(4) for _ in range(4)] for _ in range(4)],
                dtype=np.int64,
            )
            gamma_star = rng.choice([1, m - 1])
            z0 = state.z.copy()
            one_level_update(
                f, gamma_star, "u", state, DirectOracle(state, fam, a, b), fam
            )
            assert np.array_equal(state.z, (z0 + gamma_star * w_rows[f[a, b]]) % m)
            assert state.assert_restored(("x", "y"))[0]
            assert state.oracle_calls == 4 + 4 * 4**basis.t
            runs += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 60
    _report(3, f"{runs} invocations exact in {elapsed:.1f}s")


# -- criteria 4/5/6: full evaluation grid ---------------------------------------


@lru_cache(maxsize=None)
def _grid():
    """(basis, h) -> list of per-run dicts for the shared evaluation grid."""
    cells = {}
    for basis, hs in [(B15, (1, 2, 3)), (B3, (1, 2, 3, 4))]:
        m = basis.modulus
        fam = build_family(2, basis)
        for h in hs:
            t0 = time.perf_counter()
            runs = []
            for i in range(INSTANCES_PER_CELL):
                inst = gen_random_instance(h, 2, 2, seed=i)
                want = eval_bruteforce(inst)
                for k in range(TAPES_PER_INSTANCE):
                    tape = tape_from_mode(
                        "seeded-random", fam.dim, m, 1000 * h + 3 * i + k
                    )
                    state = CatalyticState(basis, fam.dim, tape)
                    value = eval_catalytic(inst, fam, state)
                    restored, _ = state.assert_restored()
                    runs.append(
                        {
                            "ok": value == want,
                            "restored": restored,
                            "calls": state.oracle_calls,
                            "peak": state.ledger.peak_free_bits,
                        }
                    )
            cells[(basis, h)] = (runs, time.perf_counter() - t0)
    return cells


def test_criterion_04_full_treeeval():
    cells = _grid()
    t2_time = sum(dt for (basis, _), (_, dt) in cells.items() if basis is B15)
    for (basis, h), (runs, dt) in cells.items():
        assert all(r["ok"] for r in runs), (basis.primes, h)
        assert all(r["restored"] for r in runs), (basis.primes, h)
    assert t2_time < 300
    assert cells[(B3, 4)][1] < 300
    n = sum(len(runs) for runs, _ in cells.values())
    _report(4, f"{n} evaluations match brute force, registers restored "
               f"(t=2 grid {t2_time:.0f}s)")


def test_criterion_05_call_recurrence():
    cells = _grid()
    claimed = {(B15, 1), (B15, 2), (B15, 3), (B3, 4)}
    for key in claimed:
        basis, h = key
        runs, _ = cells[key]
        expect = analytic_call_count(h, basis.t)
        assert all(r["calls"] == expect for r in runs), key
        assert expect == 2 * sum(
            one_level_call_count(basis.t) ** k for k in range(1, h + 1)
        )
    _report(5, "measured oracle calls equal the closed form on every cell")


def test_criterion_06_space_ledger():
    cells = _grid()
    ell = 2  # label width of every grid instance

    def feature(basis, h):
        return ell + h * math.log2(basis.modulus)

    # calibrate on the t=1 cells, then the t=2 cells must obey the bound
    a_coef = max(
        math.ceil(max(r["peak"] for r in cells[(B3, h)][0]) / feature(B3, h))
        for h in (1, 2, 3, 4)
    )
    b_coef = 0
    for h in (1, 2, 3):
        bound = a_coef * feature(B15, h) + b_coef
        peak = max(r["peak"] for r in cells[(B15, h)][0])
        assert peak <= bound, (h, peak, bound)
    _report(6, f"peaks fit {a_coef}*(ell + h*log2(m)) + {b_coef} on the t=2 grid")


# -- criterion 7: bit-tape encoding ----------------------------------------------


def test_criterion_07_bit_encoding():
    t0 = time.perf_counter()
    rng = random.Random(0)
    for trial in range(1000):
        d, m = (4, 3) if trial % 5 else (9, 15)
        width = slot_width(d, m)
        bits = [rng.getrandbits(1) for _ in range(3 * d * width)]
        enc = encode_tape(bits, d, m)
        assert decode_tape(enc) == bits
        limit = ((1 << width) // m) * m
        assert all(slot < limit for slot in enc.slots)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5
    _report(7, f"1000 tapes round-tripped in {elapsed:.1f}s")


# -- criterion 8: fanin reduction --------------------------------------------------


def test_criterion_08_fanin_reduction():
    fam_cache = {}
    checked = 0
    for r in (3, 4):
        for h in (1, 2):
            for seed in range(20):
                inst = gen_random_instance(h, 1, r, seed=seed)
                want = eval_bruteforce(inst)
                red = reduce_fanin(inst)
                assert red.fanin == 2
                assert eval_bruteforce(red) == want
                if red.ell not in fam_cache:
                    fam_cache[red.ell] = build_family(red.ell, B3)
                fam = fam_cache[red.ell]
                state = CatalyticState(
                    B3, fam.dim, tape_from_mode("seeded-random", fam.dim, 3, seed)
                )
                assert eval_catalytic(red, fam, state) == want
                checked += 1
    _report(8, f"{checked} reduced instances agree (brute and catalytic)")


# -- criterion 9: CIR correctness ----------------------------------------------------


def test_criterion_09_cir_correctness():
    t0 = time.perf_counter()
    schemes = [
        mv_cir(select_params(1, B3), build_family(1, B3)),
        mv_cir(select_params(2, B3), build_family(2, B3)),
        mv_cir(select_params(1, B15), build_family(1, B15)),
        mv_cir(select_params(2, B15), build_family(2, B15)),
        cm_cir(1),
        cm_cir(2),
    ]
    tuples = 0
    for scheme in schemes:
        rng = random.Random(17)
        n = scheme.n_db
        db = [scheme.random_element(rng) for _ in range(n * n)]
        masks = [(scheme.zero(), scheme.zero())]
        masks += [
            (scheme.random_element(rng), scheme.random_element(rng))
            for _ in range(9)
        ]
        for a in range(n):
            for b in range(n):
                for x, y in masks:
                    got = cir_retrieve(scheme, db, a, b, x, y)
                    assert np.array_equal(got, db[a * n + b]), (scheme.name, a, b)
                    tuples += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 60
    _report(9, f"{tuples} retrieval tuples exact in {elapsed:.1f}s")


# -- criterion 10: PIR -----------------------------------------------------------------


def test_criterion_10_pir():
    t0 = time.perf_counter()
    fam = build_family(1, B3, size=6)
    rng = random.Random(23)
    db = [rng.randrange(7) for _ in range(6)]
    scheme = make_pir(fam, db, q=7)
    for i_star in range(6):
        for _ in range(20):
            r = np.array([rng.randrange(3) for _ in range(fam.dim)], dtype=np.int64)
            assert pir_retrieve(scheme, i_star, r) == db[i_star]
    assert pir_privacy_check(scheme)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10
    _report(10, f"correctness exhaustive over i*, privacy marginals uniform "
                f"({elapsed:.1f}s)")


# -- criterion 11: retrieval vs. one-level correspondence ------------------------------


def test_criterion_11_correspondence():
    fam = build_family(1, B15)
    scheme = mv_cir(select_params(1, B15), fam)
    m = 15
    rng = random.Random(31)
    f = np.array([[rng.randrange(2) for _ in range(2)] for _ in range(2)],
                 dtype=np.int64)
    pairs = 0
    for gamma_star in (1, m - 1):
        db = [
            gamma_star
            * np.concatenate([fam.u_matrix[f[r, s]], fam.v_matrix[f[r, s]]]) % m
            for r in range(2)
            for s in range(2)
        ]
        for a in range(2):
            for b in range(2):
                tape = tape_from_mode("seeded-random", fam.dim, m, 7 * a + b)
                state = CatalyticState(B15, fam.dim, tape)
                z0 = state.z.copy()
                one_level_update(
                    f, gamma_star, "u", state, DirectOracle(state, fam, a, b), fam
                )
                delta = (state.z - z0) % m
                xpair = np.concatenate([state.x, np.zeros(fam.dim, dtype=np.int64)])
                ypair = np.concatenate([state.y, np.zeros(fam.dim, dtype=np.int64)])
                got = cir_retrieve(scheme, db, a, b, xpair, ypair)
                assert np.array_equal(got[: fam.dim], delta)
                pairs += 1
    _report(11, f"{pairs} matched (a, b, gamma*) tuples give identical z deltas")
