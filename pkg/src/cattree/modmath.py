"""Exact modular arithmetic over Z_m for squarefree odd m.

All values are plain Python ints; m stays small (desk scale), so nothing
here needs arbitrary-precision tricks beyond what int already gives us.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence


class NotInvertibleError(ValueError):
    pass


class NoSuchPrimeError(ValueError):
    pass


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class PrimeBasis:
    """t distinct odd primes p_1..p_t and their product m."""

    primes: tuple[int, ...]
    modulus: int = field(init=False)

    def __post_init__(self):
        ps = tuple(self.primes)
        if len(ps) < 1:
            raise ValueError("need at least one prime")
        if len(set(ps)) != len(ps):
            raise ValueError("primes must be pairwise distinct")
        for p in ps:
            if p == 2 or not _is_prime(p):
                raise ValueError(f"{p} is not an odd prime")
        object.__setattr__(self, "primes", ps)
        object.__setattr__(self, "modulus", math.prod(ps))

    @property
    def t(self) -> int:
        return len(self.primes)


def crt_combine(residues: Sequence[int], basis: PrimeBasis) -> int:
    """The unique v in Z_m with v = residues[i] (mod primes[i]) for all i.

    Constructive formula: v = sum_i r_i * M_i * (M_i^-1 mod p_i) mod m,
    with M_i = m / p_i.
    """
    if len(residues) != basis.t:
        raise ValueError(f"expected {basis.t} residues, got {len(residues)}")
    m = basis.modulus
    v = 0
    for r, p in zip(residues, basis.primes):
        if not 0 <= r < p:
            raise ValueError(f"residue {r} out of range for prime {p}")
        big = m // p
        v += r * big * pow(big, -1, p)
    return v % m


def mod_inverse(a: int, basis: PrimeBasis) -> int:
    """b with a*b = 1 (mod m); raises NotInvertibleError if gcd(a, m) != 1."""
    m = basis.modulus
    a %= m
    if math.gcd(a, m) != 1:
        raise NotInvertibleError(f"{a} is not invertible mod {m}")
    return pow(a, -1, m)


def canonical_set(basis: PrimeBasis) -> frozenset[int]:
    """Nonzero v in Z_m with v mod p in {0, 1} for every prime p of the basis.

    Built by CRT-combining every 0/1 residue pattern except all-zero; this
    yields exactly 2^t - 1 elements.
    """
    out = set()
    for mask in range(1, 1 << basis.t):
        residues = [(mask >> i) & 1 for i in range(basis.t)]
        out.add(crt_combine(residues, basis))
    return frozenset(out)


def multiplicative_order(g: int, q: int) -> int:
    if g % q == 0:
        raise ValueError("zero has no multiplicative order")
    k, acc = 1, g % q
    while acc != 1:
        acc = acc * g % q
        k += 1
    return k


def find_prime_with_roots(
    basis: PrimeBasis, search_bound: int, seed: int = 0
) -> tuple[int, tuple[int, ...]]:
    """Smallest prime q <= search_bound with m | q-1, plus one element of
    order exactly p_i in Z_q* for each basis prime.

    Order-p elements are found as r^((q-1)/p) for r drawn from a seeded
    deterministic sweep, rejecting the identity.
    """
    m = basis.modulus
    if search_bound < m + 1:
        raise ValueError("search_bound must be at least m+1")
    for q in range(m + 1, search_bound + 1, m):
        if not _is_prime(q):
            continue
        gens = []
        for p in basis.primes:
            g = 0
            # deterministic sweep over candidate bases, offset by the seed
            for r in range(2 + seed % q, 2 + seed % q + q):
                cand = pow(r % q, (q - 1) // p, q)
                if cand != 1:
                    g = cand
                    break
            if g == 0:
                break
            gens.append(g)
        if len(gens) == basis.t:
            return q, tuple(gens)
    raise NoSuchPrimeError(
        f"no prime q <= {search_bound} with {m} | q-1 and the required roots"
    )
