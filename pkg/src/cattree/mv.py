"""Matching-vector families over Z_m^d.

Pipeline: per-prime weight-indicator polynomials -> CRT-combined multilinear
polynomial -> restriction to w-subsets of the variable universe ->
coefficient/evaluation vectors -> flip transform moving the diagonal inner
product from 0 to 1.

Enumeration orders are fixed once and shared by the materialized and
streaming accessors: monomials are ordered by (degree, combinadic rank
within degree); family indices map to w-subsets by the combinatorial number
system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .modmath import PrimeBasis, canonical_set, crt_combine


# ---------------------------------------------------------------------------
# multilinear polynomials as subset-indexed coefficient maps


class MultilinearPoly:
    """Multilinear polynomial over Z_modulus, coefficients keyed by the
    frozenset of variable indices of each monomial."""

    def __init__(self, num_vars: int, coeffs: dict, modulus: int):
        self.num_vars = num_vars
        self.modulus = modulus
        self.coeffs = {
            s: c % modulus for s, c in coeffs.items() if c % modulus != 0
        }

    def degree(self) -> int:
        return max((len(s) for s in self.coeffs), default=0)

    def evaluate01(self, point: Sequence[int]) -> int:
        """Evaluate at a 0/1 point."""
        ones = frozenset(i for i, b in enumerate(point) if b)
        return sum(c for s, c in self.coeffs.items() if s <= ones) % self.modulus

    def __add__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        out = dict(self.coeffs)
        for s, c in other.coeffs.items():
            out[s] = out.get(s, 0) + c
        return MultilinearPoly(self.num_vars, out, self.modulus)

    def __sub__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        out = dict(self.coeffs)
        for s, c in other.coeffs.items():
            out[s] = out.get(s, 0) - c
        return MultilinearPoly(self.num_vars, out, self.modulus)

    def __mul__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        # multilinearization is implicit: x_i^2 -> x_i via the set union
        out: dict = {}
        for s1, c1 in self.coeffs.items():
            for s2, c2 in other.coeffs.items():
                key = s1 | s2
                out[key] = out.get(key, 0) + c1 * c2
        return MultilinearPoly(self.num_vars, out, self.modulus)

    def __pow__(self, k: int) -> "MultilinearPoly":
        acc = MultilinearPoly.constant(self.num_vars, 1, self.modulus)
        for _ in range(k):
            acc = acc * self
        return acc

    @staticmethod
    def constant(num_vars: int, c: int, modulus: int) -> "MultilinearPoly":
        return MultilinearPoly(num_vars, {frozenset(): c}, modulus)

    @staticmethod
    def elementary(num_vars: int, k: int, modulus: int) -> "MultilinearPoly":
        """Degree-k elementary symmetric polynomial; on 0/1 points this is
        C(weight, k)."""
        import itertools

        coeffs = {
            frozenset(s): 1 for s in itertools.combinations(range(num_vars), k)
        }
        return MultilinearPoly(num_vars, coeffs, modulus)


def weight_indicator_poly(p: int, e: int, w: int, num_vars: int) -> MultilinearPoly:
    """Multilinear f over Z_p with f(x) = 0 iff sum(x) = w (mod p^e), else 1,
    for all 0/1 points x; degree <= p^e - 1.

    Uses the digit-by-digit construction: the base-p digit j of the Hamming
    weight equals the elementary symmetric polynomial of degree p^j (Lucas),
    and a Fermat power turns each digit comparison into a 0/1 indicator.
    """
    one = MultilinearPoly.constant(num_vars, 1, p)
    acc = one
    for j in range(e):
        w_j = (w // p**j) % p
        digit = MultilinearPoly.elementary(num_vars, p**j, p)
        diff = digit - MultilinearPoly.constant(num_vars, w_j, p)
        acc = acc * (one - diff ** (p - 1))
    return one - acc


# ---------------------------------------------------------------------------
# combinatorial number system


def index_to_set(K: int, w: int, h_sets: int) -> frozenset[int]:
    """K-th w-subset of {0..h_sets-1} under K = sum_i C(c_i, i),
    c_w > ... > c_1 >= 0 (greedy decomposition)."""
    if not 0 <= K < math.comb(h_sets, w):
        raise ValueError(f"index {K} out of range for C({h_sets},{w})")
    rest = K
    out = []
    for i in range(w, 0, -1):
        c = i - 1
        while math.comb(c + 1, i) <= rest:
            c += 1
        out.append(c)
        rest -= math.comb(c, i)
    return frozenset(out)


def set_to_index(T: frozenset[int] | set[int]) -> int:
    cs = sorted(T)
    return sum(math.comb(c, i + 1) for i, c in enumerate(cs))


# ---------------------------------------------------------------------------
# parameter selection


class InfeasibleParamsError(ValueError):
    pass


@dataclass(frozen=True)
class MvParams:
    basis: PrimeBasis
    w: int
    h_sets: int
    exponents: tuple[int, ...]
    max_degree: int  # max_i p_i^e_i - 1, the degree bound of the polynomials
    degree_cap: int  # monomial enumeration cap, min(floor((mw)^{1/t}), h_sets)
    family_size: int  # N = C(h_sets, w)
    dim: int  # enumerated monomials + 1 flip coordinate
    target_ell: int


def _ceil_pow(w: int, t: int) -> int:
    """Smallest h with h^t >= w^(t+1), i.e. ceil(w^(1+1/t)) exactly."""
    target = w ** (t + 1)
    h = max(1, round(w ** ((t + 1) / t)))
    while h**t >= target:
        h -= 1
    while (h + 1) ** t < target:
        h += 1
    return h + 1 if h**t < target else h


def _floor_root(x: int, t: int) -> int:
    """floor(x^(1/t)) exactly."""
    r = max(0, round(x ** (1.0 / t)))
    while r**t > x:
        r -= 1
    while (r + 1) ** t <= x:
        r += 1
    return r


def select_params(ell: int, basis: PrimeBasis, w_cap: int = 64) -> MvParams:
    """Smallest set weight w whose family covers 2^ell indices, with the
    universe size and prime exponents set by the standard recipe:
    h = ceil(w^(1+1/t)) and e_i minimal with p_i^(e_i+1) > (mw)^(1/t)."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    t, m = basis.t, basis.modulus
    for w in range(1, w_cap + 1):
        h_sets = _ceil_pow(w, t)
        n = math.comb(h_sets, w)
        if n < 2**ell:
            continue
        mw = m * w
        exps = []
        for p in basis.primes:
            e = 1
            while p ** (t * (e + 1)) <= mw:
                e += 1
            exps.append(e)
        if math.prod(p**e for p, e in zip(basis.primes, exps)) <= w:
            continue
        max_deg = max(p**e for p, e in zip(basis.primes, exps)) - 1
        cap = min(_floor_root(mw, t), h_sets)
        dim = sum(math.comb(h_sets, j) for j in range(cap + 1)) + 1
        return MvParams(
            basis=basis,
            w=w,
            h_sets=h_sets,
            exponents=tuple(exps),
            max_degree=max_deg,
            degree_cap=cap,
            family_size=n,
            dim=dim,
            target_ell=ell,
        )
    raise InfeasibleParamsError(f"no w <= {w_cap} reaches family size 2^{ell}")


def combined_poly(params: MvParams) -> MultilinearPoly:
    """CRT combination of the per-prime weight indicators: 0 mod m at
    0/1 points of weight exactly w, an element of the canonical set at
    weight < w."""
    basis = params.basis
    per_prime = [
        weight_indicator_poly(p, e, params.w, params.h_sets)
        for p, e in zip(basis.primes, params.exponents)
    ]
    support = set()
    for f in per_prime:
        support |= set(f.coeffs)
    out = {}
    for s in support:
        out[s] = crt_combine([f.coeffs.get(s, 0) for f in per_prime], basis)
    return MultilinearPoly(params.h_sets, out, basis.modulus)


# ---------------------------------------------------------------------------
# the family


def flip_transform(u: Sequence[int], v: Sequence[int], m: int) -> tuple[list, list]:
    """(u || 1), (-v || 1): maps inner product g to 1 - g."""
    if len(u) != len(v):
        raise ValueError("u and v must have the same length")
    return list(u) + [1], [(-x) % m for x in v] + [1]


class MvFamily:
    """Matching-vector family: <u_i, v_j> is 0/1 mod every basis prime and
    equals 1 in Z_m exactly on the diagonal."""

    def __init__(self, params: MvParams, size: int | None = None):
        self.params = params
        self.basis = params.basis
        self.size = 2**params.target_ell if size is None else size
        if self.size > params.family_size:
            raise ValueError("requested size exceeds the family size N")
        self.sets = tuple(
            index_to_set(k, params.w, params.h_sets) for k in range(self.size)
        )
        self.poly = combined_poly(params)
        self.monomials = tuple(self._enumerate_monomials())
        if len(self.monomials) + 1 != params.dim:
            raise AssertionError("monomial count disagrees with params.dim")
        self._index = {s: i for i, s in enumerate(self.monomials)}
        missing = set(self.poly.coeffs) - set(self.monomials)
        if missing:
            raise AssertionError("polynomial support escapes the monomial cap")

    @property
    def dim(self) -> int:
        return self.params.dim

    def _enumerate_monomials(self) -> Iterator[frozenset[int]]:
        h = self.params.h_sets
        for k in range(self.params.degree_cap + 1):
            for rank in range(math.comb(h, k)):
                yield index_to_set(rank, k, h)

    # -- pre-flip vectors (coefficient / evaluation vectors)

    def u_raw(self, i: int) -> list[int]:
        t_i = self.sets[i]
        c = self.poly.coeffs
        return [c.get(s, 0) if s <= t_i else 0 for s in self.monomials]

    def v_raw(self, j: int) -> list[int]:
        t_j = self.sets[j]
        return [1 if s <= t_j else 0 for s in self.monomials]

    # -- post-flip vectors (the family proper)

    def u_vector(self, i: int) -> list[int]:
        return flip_transform(self.u_raw(i), self.v_raw(i), self.basis.modulus)[0]

    def v_vector(self, j: int) -> list[int]:
        return flip_transform(self.u_raw(j), self.v_raw(j), self.basis.modulus)[1]

    def u_coords(self, i: int) -> Iterator[int]:
        """Streaming coordinates of u_i, identical to u_vector(i)."""
        t_i = self.sets[i]
        c = self.poly.coeffs
        for s in self.monomials:
            yield c.get(s, 0) if s <= t_i else 0
        yield 1

    def v_coords(self, j: int) -> Iterator[int]:
        """Streaming coordinates of v_j, identical to v_vector(j)."""
        m = self.basis.modulus
        t_j = self.sets[j]
        for s in self.monomials:
            yield (m - 1) if s <= t_j else 0
        yield 1

    @cached_property
    def u_matrix(self) -> np.ndarray:
        return np.array([self.u_vector(i) for i in range(self.size)], dtype=np.int64)

    @cached_property
    def v_matrix(self) -> np.ndarray:
        return np.array([self.v_vector(j) for j in range(self.size)], dtype=np.int64)


def build_family(ell: int, basis: PrimeBasis, size: int | None = None) -> MvFamily:
    return MvFamily(select_params(ell, basis), size=size)


# ---------------------------------------------------------------------------
# verification


@dataclass
class FamilyReport:
    ok: bool
    pairs_checked: int
    violation: str | None = None


def verify_matrices(u_mat, v_mat, basis: PrimeBasis) -> FamilyReport:
    """Check both matching-vector axioms over all (i, j) pairs of the given
    coordinate matrices."""
    m = basis.modulus
    u_mat = np.asarray(u_mat, dtype=np.int64)
    v_mat = np.asarray(v_mat, dtype=np.int64)
    gram = (u_mat @ v_mat.T) % m
    n = u_mat.shape[0]
    checked = 0
    for i in range(n):
        for j in range(n):
            g = int(gram[i, j])
            checked += 1
            for p in basis.primes:
                if g % p not in (0, 1):
                    return FamilyReport(
                        False, checked, f"<u_{i},v_{j}> = {g} is {g % p} mod {p}"
                    )
            if (g == 1) != (i == j):
                return FamilyReport(
                    False, checked, f"<u_{i},v_{j}> = {g} breaks the diagonal rule"
                )
    return FamilyReport(True, checked)


def verify_family(
    family: MvFamily, mode: str = "exhaustive", seed: int = 0, samples: int = 200
) -> FamilyReport:
    if mode == "exhaustive":
        return verify_matrices(family.u_matrix, family.v_matrix, family.basis)
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    import random

    rng = random.Random(seed)
    m = family.basis.modulus
    u_mat, v_mat = family.u_matrix, family.v_matrix
    checked = 0
    for _ in range(samples):
        i = rng.randrange(family.size)
        j = rng.randrange(family.size)
        g = int(u_mat[i] @ v_mat[j]) % m
        checked += 1
        for p in family.basis.primes:
            if g % p not in (0, 1):
                return FamilyReport(
                    False, checked, f"<u_{i},v_{j}> = {g} is {g % p} mod {p}"
                )
        if (g == 1) != (i == j):
            return FamilyReport(
                False, checked, f"<u_{i},v_{j}> = {g} breaks the diagonal rule"
            )
    return FamilyReport(True, checked)


def export_family(family: MvFamily, path: str) -> None:
    """Diagnostic dump: header with the parameters, then one decimal
    coordinate line per vector (all u's, then all v's)."""
    p = family.params
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# mvfamily primes={','.join(map(str, p.basis.primes))} w={p.w} "
            f"h={p.h_sets} e={','.join(map(str, p.exponents))} "
            f"N={p.family_size} d={p.dim} size={family.size}\n"
        )
        for i in range(family.size):
            fh.write("u " + " ".join(map(str, family.u_vector(i))) + "\n")
        for j in range(family.size):
            fh.write("v " + " ".join(map(str, family.v_vector(j))) + "\n")


__all__ = [
    "MultilinearPoly",
    "MvParams",
    "MvFamily",
    "FamilyReport",
    "InfeasibleParamsError",
    "weight_indicator_poly",
    "combined_poly",
    "index_to_set",
    "set_to_index",
    "select_params",
    "flip_transform",
    "build_family",
    "verify_matrices",
    "verify_family",
    "export_family",
    "canonical_set",
]
