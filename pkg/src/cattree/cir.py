"""Catalytic information retrieval: the abstract scheme and its correctness
executor, the matching-vector and roots-of-unity instantiations, and the
2^t-server PIR reference protocol."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .machine import bits_for
from .modmath import (
    PrimeBasis,
    crt_combine,
    find_prime_with_roots,
    mod_inverse,
    multiplicative_order,
)
from .mv import MvFamily, MvParams
from .onelevel import crt_unit_table, sentinel_poly_monomial


@dataclass
class CirScheme:
    """A catalytic retrieval scheme over Z_modulus^dim vectors.

    get_state receives a register dict {"x": vec, "y": vec} plus an oracle
    callable oracle(target, sigma, mu, gamma, j); the oracle adds
    gamma * det_query(hidden index per sigma, j, mu) into the named
    register.  get_state must leave both registers as it found them.
    """

    name: str
    modulus: int
    dim: int  # ring element length
    n_db: int  # index space; database has n_db**2 records
    servers: int
    st_bits: int
    det_query: Callable[[int, int, int], np.ndarray]
    get_state: Callable[[dict, Callable], object]
    answer_and_reconstruct: Callable[
        [Sequence[np.ndarray], object, int, np.ndarray, np.ndarray], np.ndarray
    ]

    def zero(self) -> np.ndarray:
        return np.zeros(self.dim, dtype=np.int64)

    def random_element(self, rng) -> np.ndarray:
        return np.array(
            [rng.randrange(self.modulus) for _ in range(self.dim)], dtype=np.int64
        )


def cir_retrieve(
    scheme: CirScheme,
    db: Sequence[np.ndarray],
    a: int,
    b: int,
    x: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    """Run the full retrieval: state from the (a, b) oracle, then the sum
    of per-server reconstructions on the masked queries.  Returns the
    record at index a||b for a correct scheme, whatever x and y are."""
    if len(db) != scheme.n_db**2:
        raise ValueError("database must have n_db**2 records")
    m = scheme.modulus
    regs = {"x": np.array(x, dtype=np.int64) % m, "y": np.array(y, dtype=np.int64) % m}
    x0, y0 = regs["x"].copy(), regs["y"].copy()

    def oracle(target: str, sigma: int, mu: int, gamma: int, j: int) -> None:
        c = a if sigma == 0 else b
        regs[target] = (regs[target] + gamma * scheme.det_query(c, j, mu)) % m

    st = scheme.get_state(regs, oracle)
    if not (np.array_equal(regs["x"], x0) and np.array_equal(regs["y"], y0)):
        raise RuntimeError("get_state did not restore its registers")
    total = scheme.zero()
    for j in range(scheme.servers):
        qx = (x0 + scheme.det_query(a, j, 0)) % m
        qy = (y0 + scheme.det_query(b, j, 1)) % m
        total = (total + scheme.answer_and_reconstruct(db, st, j, qx, qy)) % m
    return total


# ---------------------------------------------------------------------------
# matching-vector instantiation


def mv_cir(params: MvParams, family: MvFamily) -> CirScheme:
    """Servers are 2t-bit strings (b-mask high, c-mask low); queries add
    CRT-scaled concatenated pairs (u_a || v_a); reconstruction is the
    conditional signed sum keyed by the sentinel exponents."""
    basis = params.basis
    m = basis.modulus
    t = len(basis.primes)
    d = family.dim
    n_db = 2**params.target_ell
    if family.size < n_db:
        raise ValueError("family too small for the index space")
    units = crt_unit_table(basis)
    low = 2**t - 1
    v_mat = family.v_matrix[:n_db]
    pairs = np.concatenate([family.u_matrix[:n_db], v_mat], axis=1)

    def det_query(a: int, j: int, mu: int) -> np.ndarray:
        mask = (j >> t) if mu == 0 else (j & low)
        return (units[mask] * pairs[a]) % m

    j_ones = (low << t) | low  # both CRT factors equal 1

    def get_state(regs: dict, oracle) -> tuple:
        # g1 = <x[:d], v_a>: bump y by (u_a || v_a) and difference the
        # cross inner product; same with roles swapped for g2
        tmp1 = int(regs["x"][:d] @ regs["y"][d:]) % m
        oracle("y", 0, 0, 1, j_ones)
        tmp2 = int(regs["x"][:d] @ regs["y"][d:]) % m
        oracle("y", 0, 0, -1, j_ones)
        g1 = (tmp2 - tmp1) % m
        tmp1 = int(regs["y"][:d] @ regs["x"][d:]) % m
        oracle("x", 1, 0, 1, j_ones)
        tmp2 = int(regs["y"][:d] @ regs["x"][d:]) % m
        oracle("x", 1, 0, -1, j_ones)
        g2 = (tmp2 - tmp1) % m
        alphas, betas = [], []
        for p in basis.primes:
            alpha, beta = sentinel_poly_monomial(p, g1 % p, g2 % p)
            alphas.append(alpha)
            betas.append(beta)
        return (g1, g2, tuple(alphas), tuple(betas))

    def answer_and_reconstruct(db, st, j, qx, qy) -> np.ndarray:
        _, _, alphas, betas = st
        cond = crt_combine(betas, basis)
        prod = 1
        for alpha in alphas:
            prod = prod * alpha
        inv = mod_inverse(prod, basis)
        sign = 1 if bin(j).count("1") % 2 == 0 else m - 1
        coef = (sign * inv) % m
        r_inner = (v_mat @ (qx[:d] % m)) % m
        s_inner = (v_mat @ (qy[:d] % m)) % m
        acc = np.zeros(2 * d, dtype=np.int64)
        for r in range(n_db):
            for s in range(n_db):
                if (r_inner[r] * s_inner[s]) % m == cond:
                    acc = (acc + coef * db[r * n_db + s]) % m
        return acc

    st_bits = 2 * bits_for(m) + sum(2 + bits_for(p) for p in basis.primes)
    return CirScheme(
        name="mv",
        modulus=m,
        dim=2 * d,
        n_db=n_db,
        servers=4**t,
        st_bits=st_bits,
        det_query=det_query,
        get_state=get_state,
        answer_and_reconstruct=answer_and_reconstruct,
    )


# ---------------------------------------------------------------------------
# roots-of-unity instantiation


class NoFieldFoundError(RuntimeError):
    pass


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in range(2, int(n**0.5) + 1):
        if n % p == 0:
            return False
    return True


def find_unity_field(ell: int, bound: int = 10_000) -> tuple[int, int, int]:
    """Smallest prime q >= 2*ell + 2 admitting an element of order s for
    some s with 2*ell < s < q and s | q - 1.  Returns (q, s, omega)."""
    for q in range(max(2 * ell + 2, 3), bound):
        if not _is_prime(q):
            continue
        for s in range(2 * ell + 1, q):
            if (q - 1) % s != 0:
                continue
            for w in range(2, q):
                if multiplicative_order(w, q) == s:
                    return q, s, w
    raise NoFieldFoundError(f"no prime below {bound} with a usable root of unity")


def _multilinear_eval(
    db: Sequence[np.ndarray], xs: np.ndarray, ys: np.ndarray, q: int
) -> np.ndarray:
    """Multilinear extension of (a, b) -> db[a||b] evaluated at a point of
    F^ell x F^ell, streamed record by record."""
    ell = len(xs)
    acc = np.zeros(len(db[0]), dtype=np.int64)
    for a_bits in itertools.product((0, 1), repeat=ell):
        wa = 1
        for bit, x in zip(a_bits, xs):
            wa = wa * (x if bit else (1 - x)) % q
        if wa == 0:
            continue
        a = int("".join(map(str, a_bits)), 2)
        for b_bits in itertools.product((0, 1), repeat=ell):
            w = wa
            for bit, y in zip(b_bits, ys):
                w = w * (y if bit else (1 - y)) % q
            if w == 0:
                continue
            b = int("".join(map(str, b_bits)), 2)
            acc = (acc + w * db[(a << ell) | b]) % q
    return acc


def _bit_vector(a: int, ell: int) -> np.ndarray:
    return np.array([(a >> (ell - 1 - i)) & 1 for i in range(ell)], dtype=np.int64)


def cm_cir(ell: int, bound: int = 10_000) -> CirScheme:
    """Roots-of-unity scheme: s servers rotate the masks through the powers
    of omega; the multilinear extension of the database telescopes back to
    the addressed record (degree <= 2*ell < s kills every mask term), so
    each server contributes g(omega^j . query pair) / s."""
    if ell < 1:
        raise ValueError("ell must be positive")
    q, s, omega = find_unity_field(ell, bound)
    omega_inv = pow(omega, -1, q)
    s_inv = pow(s % q, -1, q)

    def det_query(a: int, j: int, mu: int) -> np.ndarray:
        return pow(omega_inv, j, q) * _bit_vector(a, ell) % q

    def get_state(regs: dict, oracle) -> None:
        return None

    def answer_and_reconstruct(db, st, j, qx, qy) -> np.ndarray:
        rot = pow(omega, j, q)
        return _multilinear_eval(db, rot * qx % q, rot * qy % q, q) * s_inv % q

    return CirScheme(
        name="cm",
        modulus=q,
        dim=ell,
        n_db=2**ell,
        servers=s,
        st_bits=0,
        det_query=det_query,
        get_state=get_state,
        answer_and_reconstruct=answer_and_reconstruct,
    )


# ---------------------------------------------------------------------------
# 2^t-server PIR


@dataclass
class PirScheme:
    basis: PrimeBasis
    q: int
    generators: tuple[int, ...]
    family: MvFamily
    db: tuple[int, ...]

    def __post_init__(self):
        for g, p in zip(self.generators, self.basis.primes):
            if multiplicative_order(g, self.q) != p:
                raise ValueError(f"generator {g} does not have order {p} mod {self.q}")
        if len(self.db) > self.family.size:
            raise ValueError("database larger than the vector family")
        if any(not 0 <= v < self.q for v in self.db):
            raise ValueError("database records must lie in Z_q")


def make_pir(family: MvFamily, db: Sequence[int], q: int | None = None) -> PirScheme:
    basis = family.params.basis
    if q is None:
        q, gens = find_prime_with_roots(basis, 10_000)
    else:
        try:
            gens = [
                next(w for w in range(2, q) if multiplicative_order(w, q) == p)
                for p in basis.primes
            ]
        except StopIteration:
            raise ValueError(f"Z_{q} has no elements of the required orders") from None
    return PirScheme(
        basis=basis, q=q, generators=tuple(gens), family=family, db=tuple(db)
    )


def pir_query(scheme: PirScheme, i_star: int, r: np.ndarray) -> list[np.ndarray]:
    """Per-server queries: server (b_1..b_t) gets r + CRT(b)*u_{i*}."""
    basis = scheme.basis
    m = basis.modulus
    t = len(basis.primes)
    units = crt_unit_table(basis)
    u = scheme.family.u_matrix[i_star]
    return [(np.asarray(r) + units[bmask] * u) % m for bmask in range(2**t)]


def pir_answer(scheme: PirScheme, server: int, query: np.ndarray) -> int:
    q = scheme.q
    total = 0
    for i, rec in enumerate(scheme.db):
        prod = rec % q
        inner = int(np.asarray(query) @ scheme.family.v_matrix[i])
        for g in scheme.generators:
            prod = prod * pow(g, inner, q) % q
        total = (total + prod) % q
    return total


def pir_reconstruct(
    scheme: PirScheme, i_star: int, r: np.ndarray, answers: Sequence[int]
) -> int:
    q = scheme.q
    signed = 0
    for bmask, ans in enumerate(answers):
        sign = 1 if bin(bmask).count("1") % 2 == 0 else q - 1
        signed = (signed + sign * ans) % q
    inner = int(np.asarray(r) @ scheme.family.v_matrix[i_star])
    denom = 1
    for g in scheme.generators:
        denom = denom * pow(g, inner, q) % q * (1 - g) % q
    denom %= q
    if denom == 0:
        raise ZeroDivisionError("degenerate generators: reconstruction denominator 0")
    return signed * pow(denom, -1, q) % q


def pir_retrieve(scheme: PirScheme, i_star: int, r: np.ndarray) -> int:
    queries = pir_query(scheme, i_star, r)
    answers = [pir_answer(scheme, b, qu) for b, qu in enumerate(queries)]
    return pir_reconstruct(scheme, i_star, r, answers)


def pir_privacy_check(scheme: PirScheme, indices: Sequence[int] | None = None) -> bool:
    """Exact marginal check: for every index and server, each query
    coordinate is a translation of the uniform randomness coordinate, so
    its distribution over r is uniform on Z_m.  Verified by enumeration."""
    basis = scheme.basis
    m = basis.modulus
    t = len(basis.primes)
    units = crt_unit_table(basis)
    full = sorted(range(m))
    if indices is None:
        indices = range(len(scheme.db))
    for i_star in indices:
        u = scheme.family.u_matrix[i_star]
        for bmask in range(2**t):
            for coord in u:
                seen = sorted((r + units[bmask] * int(coord)) % m for r in range(m))
                if seen != full:
                    return False
    return True
