"""One level of catalytic evaluation: compute z += gamma* . w_{f(a, b)}
against an oracle that adds matching vectors for the hidden pair (a, b)
into the x/y registers, restoring x and y on the way out.

The oracle contract: oracle(gamma, ctrl, sigma) adds gamma times u_a/v_a
(sigma = 0, into x) or u_b/v_b (sigma = 1, into y), with ctrl picking the
u side (0) or the v side (1). gamma is a scalar in Z_m.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .machine import CatalyticState, bits_for, register_pointer_bits
from .modmath import PrimeBasis, crt_combine, mod_inverse
from .mv import MvFamily
from ._kernel import scan_update as default_scan


def sentinel_poly_monomial(p: int, g1: int, g2: int) -> tuple[int, int]:
    """First nonzero monomial alpha * X^beta (smallest exponent first) of
    f(X) = X^(g1 g2) - X^((g1+1) g2) - X^(g1 (g2+1)) + X^((g1+1)(g2+1)),
    exponents mod p, coefficients over the integers.

    The polynomial is never identically zero (f'(1) = 1 mod p), and its
    coefficients lie in {-2, -1, 1, 2}.
    """
    coeffs = [0] * p
    for b, c in itertools.product((0, 1), repeat=2):
        coeffs[(g1 + b) * (g2 + c) % p] += (-1) ** (b + c)
    for beta, alpha in enumerate(coeffs):
        if alpha != 0:
            return alpha, beta
    raise AssertionError("sentinel polynomial vanished; impossible by design")


@lru_cache(maxsize=None)
def _sentinel_data(basis: PrimeBasis, g1: int, g2: int):
    """(alphas, betas, CRT(betas), inverse of prod(alphas) mod m)."""
    alphas, betas = [], []
    for p in basis.primes:
        a, b = sentinel_poly_monomial(p, g1 % p, g2 % p)
        alphas.append(a)
        betas.append(b)
    cond = crt_combine(betas, basis)
    m = basis.modulus
    inv = mod_inverse(math.prod(alphas) % m, basis)
    return tuple(alphas), tuple(betas), cond, inv


@lru_cache(maxsize=None)
def crt_unit_table(basis: PrimeBasis) -> tuple[int, ...]:
    """CRT(b_1..b_t) for every bit assignment, indexed by the bit mask
    (bit i of the mask is the residue at prime i)."""
    out = []
    for mask in range(1 << basis.t):
        out.append(crt_combine([(mask >> i) & 1 for i in range(basis.t)], basis))
    return tuple(out)


# ---------------------------------------------------------------------------
# the w-family selectors


def value_chunk_bits(m: int) -> int:
    return m.bit_length() - 1  # floor(log2 m)


def value_coord_count(ell: int, m: int) -> int:
    return math.ceil(ell / value_chunk_bits(m))


def pack_value(val: int, ell: int, m: int) -> list[int]:
    """Chunk the ell-bit value most-significant-first into groups of
    floor(log2 m) bits, one Z_m coordinate per group."""
    if not 0 <= val < 2**ell:
        raise ValueError(f"value {val} does not fit in {ell} bits")
    b = value_chunk_bits(m)
    nv = value_coord_count(ell, m)
    s = format(val, f"0{nv * b}b")
    return [int(s[i * b : (i + 1) * b], 2) for i in range(nv)]


def unpack_value(coords, ell: int, m: int) -> int:
    b = value_chunk_bits(m)
    nv = value_coord_count(ell, m)
    coords = list(coords)
    if len(coords) != nv:
        raise ValueError(f"expected {nv} value coordinates")
    val = 0
    for c in coords:
        c = int(c)
        if not 0 <= c < 2**b:
            raise ValueError(f"coordinate {c} is not a valid {b}-bit chunk")
        val = (val << b) | c
    if val >= 2**ell:
        raise ValueError(f"decoded value {val} exceeds {ell} bits")
    return val


def value_row(val: int, ell: int, m: int, d: int) -> list[int]:
    """The VALUE-selector vector: packed chunks in the final coordinates,
    zero elsewhere."""
    chunks = pack_value(val, ell, m)
    if len(chunks) > d:
        raise ValueError("dimension too small for the value slot")
    return [0] * (d - len(chunks)) + chunks


def w_matrix(selector: str, family: MvFamily, ell: int) -> np.ndarray:
    """Materialized w_s rows for s in {0,1}^ell."""
    m = family.basis.modulus
    if selector == "u":
        return family.u_matrix[: 2**ell]
    if selector == "v":
        return family.v_matrix[: 2**ell]
    if selector == "value":
        return np.array(
            [value_row(s, ell, m, family.dim) for s in range(2**ell)],
            dtype=np.int64,
        )
    raise ValueError(f"unknown w-family selector {selector!r}")


def w_coords(selector: str, family: MvFamily, ell: int, s: int):
    """Streaming coordinates of w_s, matching w_matrix rows."""
    if selector == "u":
        return family.u_coords(s)
    if selector == "v":
        return family.v_coords(s)
    if selector == "value":
        return iter(value_row(s, ell, family.basis.modulus, family.dim))
    raise ValueError(f"unknown w-family selector {selector!r}")


# ---------------------------------------------------------------------------
# the algorithm


def _dot_mod(a: np.ndarray, b: np.ndarray, m: int) -> int:
    return int(a @ b) % m


def paired_inner_products(state: CatalyticState, oracle) -> tuple[int, int]:
    """g1 = <x, v_a>, g2 = <y, v_b> via the three-temporary difference
    trick: two register swaps and exactly 4 oracle calls; x, y, z are
    restored on return."""
    m = state.basis.modulus
    with state.ledger.scope("inner-product-temps", inner_product_temp_bits(state.basis)):
        tmp1 = _dot_mod(state.x, state.y, m)
        state.swap("x", "y")
        oracle(1, 1, 0)
        tmp2 = _dot_mod(state.x, state.y, m)
        oracle(m - 1, 1, 0)
        oracle(1, 1, 1)
        tmp3 = _dot_mod(state.x, state.y, m)
        oracle(m - 1, 1, 1)
        state.swap("x", "y")
        g1 = (tmp2 - tmp1) % m
        g2 = (tmp3 - tmp1) % m
    return g1, g2


def _streaming_scan(state, family, w_sel, ell, f_table, cond, coef, m):
    """Reference scan computing the inner products from the streaming
    coordinate generators; must agree with the kernel path."""
    n = f_table.shape[0]
    g1 = [
        sum(c * int(v) for c, v in zip(family.v_coords(r), state.x)) % m
        for r in range(n)
    ]
    g2 = [
        sum(c * int(v) for c, v in zip(family.v_coords(s), state.y)) % m
        for s in range(n)
    ]
    matches = 0
    for r in range(n):
        for s in range(n):
            if g1[r] * g2[s] % m == cond:
                matches += 1
                state.add_scaled(
                    "z", coef, w_coords(w_sel, family, ell, int(f_table[r, s]))
                )
    return matches


def one_level_update(
    f_table: np.ndarray,
    gamma_star: int,
    wfam: str,
    state: CatalyticState,
    oracle,
    family: MvFamily,
    mode: str = "table",
    kernel=None,
) -> None:
    """z += gamma* . w_{f(a, b)} for the oracle's hidden (a, b); x and y
    are left bit-identical. Issues exactly 4 + 4 * 4^t oracle calls.

    mode "table" runs the scan over materialized vector matrices through
    the selected kernel; mode "streaming" recomputes every coordinate from
    the generators (slow, for cross-checking).
    """
    basis = state.basis
    m = basis.modulus
    t = basis.t
    f_table = np.asarray(f_table, dtype=np.int64)
    n = f_table.shape[0]
    ell = n.bit_length() - 1
    if f_table.shape != (n, n) or 2**ell != n:
        raise ValueError("f_table must be 2^ell x 2^ell")
    if n > family.size:
        raise ValueError("family too small for this truth table")
    if family.dim != state.d:
        raise ValueError("family dimension does not match the register width")
    if kernel is None:
        kernel = default_scan

    ledger = state.ledger
    with ledger.scope("one-level-locals", one_level_local_bits(basis)):
        g1, g2 = paired_inner_products(state, oracle)
        _, _, cond, inv_alpha = _sentinel_data(basis, g1, g2)
        units = crt_unit_table(basis)
        if mode == "table":
            v_mat = family.v_matrix[:n]
            w_mat = w_matrix(wfam, family, ell)

        scan_bits = scan_scratch_bits(ell, state.d, m)
        for bmask in range(1 << t):
            for cmask in range(1 << t):
                gamma_b = units[bmask]
                gamma_c = units[cmask]
                oracle(gamma_b, 0, 0)
                oracle(gamma_c, 0, 1)
                sign = -1 if (bin(bmask + (cmask << t)).count("1") & 1) else 1
                coef = gamma_star * sign * inv_alpha % m
                with ledger.scope("scan-scratch", scan_bits):
                    if mode == "table":
                        kernel(
                            state.x, state.y, state.z,
                            v_mat, w_mat, f_table, cond, coef, m,
                        )
                    elif mode == "streaming":
                        _streaming_scan(
                            state, family, wfam, ell, f_table, cond, coef, m
                        )
                    else:
                        raise ValueError(f"unknown mode {mode!r}")
                oracle((m - gamma_b) % m, 0, 0)
                oracle((m - gamma_c) % m, 0, 1)


def one_level_local_bits(basis: PrimeBasis) -> int:
    """Locals held for the whole invocation: g1, g2, the per-prime sentinel
    (alpha, beta), the current (b, c) bits, and a gamma scratch value."""
    m = basis.modulus
    return (
        2 * bits_for(m)
        + sum(2 + bits_for(p) for p in basis.primes)
        + 2 * basis.t
        + bits_for(m)
    )


def inner_product_temp_bits(basis: PrimeBasis) -> int:
    return 3 * bits_for(basis.modulus)


def scan_scratch_bits(ell: int, d: int, m: int) -> int:
    """Scratch alive only inside one (r, s) scan: the loop counters plus a
    register index."""
    return 2 * ell + register_pointer_bits(d, m)


@lru_cache(maxsize=None)
def sentinel_tables(basis: PrimeBasis) -> tuple[np.ndarray, np.ndarray]:
    """(cond, inv_alpha) for every (g1, g2) in Z_m^2, as m x m tables for
    the compiled fast path."""
    m = basis.modulus
    cond = np.empty((m, m), dtype=np.int64)
    inv = np.empty((m, m), dtype=np.int64)
    for g1 in range(m):
        for g2 in range(m):
            _, _, c, ia = _sentinel_data(basis, g1, g2)
            cond[g1, g2] = c
            inv[g1, g2] = ia
    return cond, inv


def one_level_call_count(t: int) -> int:
    """Oracle calls per one-level invocation: 4 for the inner products plus
    4 per (b, c) bit assignment."""
    return 4 + 4 * 4**t


class DirectOracle:
    """Reference oracle for a known hidden pair (a, b): applies the register
    update straight from the materialized family."""

    def __init__(self, state: CatalyticState, family: MvFamily, a: int, b: int):
        self.state = state
        self.family = family
        self.a = a
        self.b = b

    def __call__(self, gamma: int, ctrl: int, sigma: int) -> None:
        self.state.record_oracle_call()
        idx = self.a if sigma == 0 else self.b
        mat = self.family.u_matrix if ctrl == 0 else self.family.v_matrix
        self.state.add_scaled("x" if sigma == 0 else "y", gamma, mat[idx])
