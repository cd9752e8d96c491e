"""Tree evaluation: instance model, brute-force reference, the recursive
catalytic driver, fanin reduction, and the instance/stats file formats."""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .machine import (
    CatalyticState,
    RestorationError,
    bits_for,
    register_pointer_bits,
)
from .mv import MvFamily
from ._kernel import leaf_invoke
from .onelevel import (
    crt_unit_table,
    inner_product_temp_bits,
    one_level_call_count,
    one_level_local_bits,
    one_level_update,
    scan_scratch_bits,
    sentinel_tables,
    unpack_value,
    value_coord_count,
    w_matrix,
)


class ParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# instances


def leaf_paths(h: int, fanin: int):
    for tup in itertools.product("0123456789"[:fanin], repeat=h):
        yield "".join(tup)


def node_paths(h: int, fanin: int):
    for length in range(h):
        for tup in itertools.product("0123456789"[:fanin], repeat=length):
            yield "".join(tup)


@dataclass
class TreeEvalInstance:
    h: int
    ell: int
    fanin: int
    leaves: dict[str, int]
    nodes: dict[str, tuple[int, ...]] = field(repr=False)

    def __post_init__(self):
        if self.h < 1 or self.ell < 1 or self.fanin < 2:
            raise ValueError("need h >= 1, ell >= 1, fanin >= 2")
        if self.fanin > 10:
            raise ValueError("fanin > 10 not supported by the path alphabet")
        table_len = 2 ** (self.fanin * self.ell)
        cap = 2**self.ell
        for u in node_paths(self.h, self.fanin):
            tbl = self.nodes.get(u)
            if tbl is None:
                raise ValueError(f"missing table for internal node {u!r}")
            if len(tbl) != table_len:
                raise ValueError(f"table at {u!r} has {len(tbl)} entries")
            if any(not 0 <= v < cap for v in tbl):
                raise ValueError(f"table at {u!r} has an out-of-range value")
        for u in leaf_paths(self.h, self.fanin):
            v = self.leaves.get(u)
            if v is None:
                raise ValueError(f"missing leaf {u!r}")
            if not 0 <= v < cap:
                raise ValueError(f"leaf {u!r} value out of range")

    def input_size(self) -> int:
        return self.fanin**self.h * self.ell * 2 ** (self.fanin * self.ell)


def eval_bruteforce(instance: TreeEvalInstance) -> int:
    """Root value by bottom-up recursion (any fanin)."""

    def value(u: str) -> int:
        if len(u) == instance.h:
            return instance.leaves[u]
        idx = 0
        for c in range(instance.fanin):
            idx = (idx << instance.ell) | value(u + str(c))
        return instance.nodes[u][idx]

    return value("")


def gen_random_instance(
    h: int, ell: int, fanin: int = 2, seed: int = 0
) -> TreeEvalInstance:
    """Deterministic per seed: entries drawn in canonical order (leaves
    ascending, then nodes by (length, lex), table entries in index order)
    from random.Random(seed).getrandbits."""
    rng = random.Random(seed)
    leaves = {u: rng.getrandbits(ell) for u in leaf_paths(h, fanin)}
    table_len = 2 ** (fanin * ell)
    nodes = {
        u: tuple(rng.getrandbits(ell) for _ in range(table_len))
        for u in node_paths(h, fanin)
    }
    return TreeEvalInstance(h=h, ell=ell, fanin=fanin, leaves=leaves, nodes=nodes)


# ---------------------------------------------------------------------------
# instance file format


def _path_token(u: str) -> str:
    return u if u else "-"


def _token_path(tok: str) -> str:
    return "" if tok == "-" else tok


def serialize_instance(instance: TreeEvalInstance) -> str:
    """Line format: header, then leaves ascending, then internal nodes by
    (length, lex). The empty (root) index is written as '-'."""
    lines = [f"treeeval v1 h={instance.h} ell={instance.ell} r={instance.fanin}"]
    for u in sorted(instance.leaves):
        lines.append(f"leaf {u} {instance.leaves[u]:x}")
    for u in sorted(instance.nodes, key=lambda s: (len(s), s)):
        entries = " ".join(f"{v:x}" for v in instance.nodes[u])
        lines.append(f"node {_path_token(u)} {entries}")
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> TreeEvalInstance:
    lines = text.splitlines()
    if not lines:
        raise ParseError("line 1: empty instance file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "treeeval" or head[1] != "v1":
        raise ParseError("line 1: bad header")
    try:
        kv = dict(f.split("=", 1) for f in head[2:])
        h, ell, fanin = int(kv["h"]), int(kv["ell"]), int(kv["r"])
    except (ValueError, KeyError) as exc:
        raise ParseError(f"line 1: bad header field ({exc})") from exc
    leaves: dict[str, int] = {}
    nodes: dict[str, tuple[int, ...]] = {}
    alphabet = set("0123456789"[:fanin])
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        kind = parts[0]
        if kind not in ("leaf", "node") or len(parts) < 3:
            raise ParseError(f"line {lineno}: expected 'leaf' or 'node' record")
        u = _token_path(parts[1])
        if set(u) - alphabet:
            raise ParseError(f"line {lineno}: index {parts[1]!r} off the alphabet")
        try:
            vals = [int(p, 16) for p in parts[2:]]
        except ValueError:
            raise ParseError(f"line {lineno}: non-hex value field") from None
        if kind == "leaf":
            if len(vals) != 1:
                raise ParseError(f"line {lineno}: leaf takes exactly one value")
            leaves[u] = vals[0]
        else:
            nodes[u] = tuple(vals)
    try:
        return TreeEvalInstance(h=h, ell=ell, fanin=fanin, leaves=leaves, nodes=nodes)
    except ValueError as exc:
        raise ParseError(f"structure: {exc}") from exc


# ---------------------------------------------------------------------------
# fanin reduction


def _gadget_ranges(r: int) -> tuple[int, dict[str, tuple[int, int]], list[str]]:
    """Balanced full binary gadget over r child slots: (height, interior
    range map, per-slot root-to-leaf path). A size-1 range is chained down
    its left child; right children off the chain are dummies."""
    g = max(1, math.ceil(math.log2(r)))
    ranges: dict[str, tuple[int, int]] = {}
    slot_path = [""] * r

    def cover(sigma: str, lo: int, hi: int) -> None:
        if len(sigma) == g:
            slot_path[lo] = sigma
            return
        ranges[sigma] = (lo, hi)
        n = hi - lo
        if n >= 2:
            mid = lo + math.ceil(n / 2)
            cover(sigma + "0", lo, mid)
            cover(sigma + "1", mid, hi)
        else:
            cover(sigma + "0", lo, hi)

    cover("", 0, r)
    return g, ranges, slot_path


def reduce_fanin(instance: TreeEvalInstance) -> TreeEvalInstance:
    """Gadget reduction to fanin 2: every original node becomes a
    gadget tree of height ceil(log2 r); non-root gadget nodes concatenate
    their children's (zero-padded) values, the gadget root applies the
    original function. Output height h*ceil(log2 r), labels ell*ceil(r/2)
    bits."""
    r, h, ell = instance.fanin, instance.h, instance.ell
    g, ranges, slot_path = _gadget_ranges(r)
    ellp = ell * math.ceil(r / 2)
    hp = h * g

    def phi(u: str) -> str:
        return "".join(slot_path[int(c)] for c in u)

    new_leaves = {u: 0 for u in leaf_paths(hp, 2)}
    for u, v in instance.leaves.items():
        new_leaves[phi(u)] = v

    zero_table = (0,) * 2 ** (2 * ellp)
    new_nodes = {u: zero_table for u in node_paths(hp, 2)}

    size = 2**ellp
    for u, table in instance.nodes.items():
        base = phi(u)
        for sigma, (lo, hi) in ranges.items():
            n = hi - lo
            if sigma == "":
                n_left = math.ceil(r / 2)
                n_right = r - n_left
                rows = []
                for a in range(size):
                    a_bits = a % 2 ** (n_left * ell)
                    for b in range(size):
                        b_bits = b % 2 ** (n_right * ell)
                        idx = (a_bits << (n_right * ell)) | b_bits
                        rows.append(table[idx])
                new_nodes[base] = tuple(rows)
            elif n == 1:
                # chain: pass the single collected value through unchanged
                new_nodes[base + sigma] = tuple(
                    a % 2**ell for a in range(size) for _ in range(size)
                )
            else:
                n_left = math.ceil(n / 2)
                n_right = n - n_left
                rows = []
                for a in range(size):
                    a_bits = a % 2 ** (n_left * ell)
                    for b in range(size):
                        b_bits = b % 2 ** (n_right * ell)
                        rows.append((a_bits << (n_right * ell)) | b_bits)
                new_nodes[base + sigma] = tuple(rows)

    return TreeEvalInstance(h=hp, ell=ellp, fanin=2, leaves=new_leaves, nodes=new_nodes)


# ---------------------------------------------------------------------------
# the catalytic driver


class TreeOracle:
    """Implements the one-level oracle contract by recursion: non-leaf
    requests swap the target register with z, run the one-level algorithm
    at the child node, and swap back; leaf requests add the matching
    vector of the leaf value directly."""

    def __init__(
        self,
        instance: TreeEvalInstance,
        family: MvFamily,
        state: CatalyticState,
        mode: str = "table",
        kernel=None,
    ):
        if instance.fanin != 2:
            raise ValueError("the catalytic driver needs a fanin-2 instance")
        self.instance = instance
        self.family = family
        self.state = state
        self.mode = mode
        self.kernel = kernel
        n = 2**instance.ell
        self.tables = {
            u: np.array(tbl, dtype=np.int64).reshape(n, n)
            for u, tbl in instance.nodes.items()
        }
        m = state.basis.modulus
        self.m = m
        self.ptr_bits = register_pointer_bits(state.d, m)
        self.stash_bits = bits_for(m) + 2 + self.ptr_bits
        # leaf adds dominate the call volume; pre-scale the vector rows per
        # (gamma, side) so each add is two in-place array ops
        self._scaled: dict[tuple[int, int], np.ndarray] = {}
        # bottom-level invocations run entirely in the compiled extension
        # when it is available and no explicit kernel was forced
        self.use_fast = (
            mode == "table" and kernel is None and leaf_invoke is not None
        )
        if self.use_fast:
            n = 2**instance.ell
            self._u_rows = np.ascontiguousarray(family.u_matrix[:n])
            self._v_rows = np.ascontiguousarray(family.v_matrix[:n])
            self._units = np.array(crt_unit_table(state.basis), dtype=np.int64)
            self._cond_tab, self._inv_tab = sentinel_tables(state.basis)
            self._w_mats = {
                "u": self._u_rows,
                "v": self._v_rows,
                "value": w_matrix("value", family, instance.ell),
            }
            self._local_bits = one_level_local_bits(state.basis)
            self._temp_bits = inner_product_temp_bits(state.basis)
            self._scan_bits = scan_scratch_bits(instance.ell, state.d, m)

    def run_level(self, path: str, gamma_star: int, wfam: str) -> None:
        """One-level invocation at an internal node, via the compiled
        whole-invocation routine when the node's children are leaves."""
        state = self.state
        if self.use_fast and len(path) == self.instance.h - 1:
            # mirror the ledger traffic of the interpreted path so the
            # peak-free-space accounting is identical
            led = state.ledger
            led.push("one-level-locals", self._local_bits)
            led.push("inner-product-temps", self._temp_bits)
            led.pop("inner-product-temps")
            led.push("scan-scratch", self._scan_bits)
            led.pop("scan-scratch")
            calls = leaf_invoke(
                state.regs["x"], state.regs["y"], state.regs["z"],
                self._u_rows, self._v_rows, self._w_mats[wfam],
                self.tables[path],
                self.instance.leaves[path + "0"],
                self.instance.leaves[path + "1"],
                gamma_star % self.m, self._units,
                self._cond_tab, self._inv_tab,
                self.m, len(state.basis.primes),
            )
            state.oracle_calls += calls
            led.pop("one-level-locals")
            return
        one_level_update(
            self.tables[path], gamma_star, wfam, state,
            self.oracle_for(path), self.family,
            mode=self.mode, kernel=self.kernel,
        )

    def _scaled_rows(self, gamma: int, ctrl: int) -> np.ndarray:
        key = (gamma % self.m, ctrl)
        rows = self._scaled.get(key)
        if rows is None:
            mat = self.family.u_matrix if ctrl == 0 else self.family.v_matrix
            rows = (key[0] * mat[: 2**self.instance.ell]) % self.m
            self._scaled[key] = rows
        return rows

    def oracle_for(self, path: str):
        def oracle(gamma: int, ctrl: int, sigma: int) -> None:
            self.handle(path, gamma, ctrl, sigma)

        return oracle

    def handle(self, path: str, gamma: int, ctrl: int, sigma: int) -> None:
        state = self.state
        state.oracle_calls += 1
        child = path + str(sigma)
        if len(child) > self.instance.h:
            raise RuntimeError("oracle call below the leaf layer")
        target = "x" if sigma == 0 else "y"
        if len(child) == self.instance.h:
            # leaf-adjacent: the request's operand is a leaf value we can
            # read off the input; local space is covered by the level stash
            row = self._scaled_rows(gamma, ctrl)[self.instance.leaves[child]]
            reg = state.regs[target]
            reg += row
            reg %= self.m
            return
        # the request's (gamma, ctrl, sigma) live in this level's stash for
        # the duration of the child invocation
        with state.ledger.scope("swap-scratch", self.ptr_bits):
            state.swap(target, "z")
        self.run_level(child, gamma, "u" if ctrl == 0 else "v")
        with state.ledger.scope("swap-scratch", self.ptr_bits):
            state.swap(target, "z")


def eval_catalytic(
    instance: TreeEvalInstance,
    family: MvFamily,
    state: CatalyticState,
    mode: str = "table",
    kernel=None,
) -> int:
    """Root value via the recursive catalytic algorithm: one pass with
    gamma* = 1 writing the packed value into z's value slot, a read-off
    against the free-space copy, then a gamma* = -1 pass undoing it.
    All three registers must restore bit-exactly or this raises."""
    ell, h = instance.ell, instance.h
    m = state.basis.modulus
    if family.size < 2**ell:
        raise ValueError("family too small for this label width")
    nv = value_coord_count(ell, m)
    if nv > state.d:
        raise ValueError("register too narrow for the value slot")
    driver = TreeOracle(instance, family, state, mode=mode, kernel=kernel)
    ledger = state.ledger
    with ledger.scope("path-register", h):
        with ledger.scope("level-stashes", h * driver.stash_bits):
            with ledger.scope("value-slot-copy", nv * bits_for(m)):
                reg = state.z[-nv:].copy()
                driver.run_level("", 1, "value")
                diff = (state.z[-nv:] - reg) % m
                value = unpack_value(diff, ell, m)
                driver.run_level("", m - 1, "value")
    ok, where = state.assert_restored(("x", "y", "z"))
    if not ok:
        raise RestorationError(f"catalytic tape not restored: {where}")
    return value


def analytic_call_count(h: int, t: int) -> int:
    """Closed-form oracle-call total for a full eval_catalytic run: each
    invocation issues Q = 4 + 4*4^t calls, each spawning a child invocation
    unless leaf-adjacent, and the driver runs two passes."""
    q = one_level_call_count(t)
    return 2 * sum(q**k for k in range(1, h + 1))


# ---------------------------------------------------------------------------
# stats records


STATS_FIELDS = (
    "instance",
    "h",
    "ell",
    "t",
    "m",
    "d",
    "oracle_calls",
    "peak_free_bits",
    "catalytic_bits",
    "wall_time_ms",
    "restored",
    "value_hex",
)


@dataclass
class StatsRecord:
    instance: str
    h: int
    ell: int
    t: int
    m: int
    d: int
    oracle_calls: int
    peak_free_bits: int
    catalytic_bits: int
    wall_time_ms: int
    restored: bool
    value_hex: str

    def to_line(self) -> str:
        vals = []
        for f in STATS_FIELDS:
            v = getattr(self, f)
            if isinstance(v, bool):
                v = "true" if v else "false"
            vals.append(f"{f}={v}")
        return " ".join(vals)

    @staticmethod
    def from_line(line: str) -> "StatsRecord":
        kv = dict(part.split("=", 1) for part in line.split())
        return StatsRecord(
            instance=kv["instance"],
            h=int(kv["h"]),
            ell=int(kv["ell"]),
            t=int(kv["t"]),
            m=int(kv["m"]),
            d=int(kv["d"]),
            oracle_calls=int(kv["oracle_calls"]),
            peak_free_bits=int(kv["peak_free_bits"]),
            catalytic_bits=int(kv["catalytic_bits"]),
            wall_time_ms=int(kv["wall_time_ms"]),
            restored=kv["restored"] == "true",
            value_hex=kv["value_hex"],
        )
