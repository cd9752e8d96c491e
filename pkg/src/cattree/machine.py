"""Instrumented catalytic register machine.

Three Z_m^d registers backed by a snapshot for restoration checks, a
cooperative free-space ledger, and the bit-level tape encoding that packs
arbitrary bit strings into valid register contents via a shared offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modmath import PrimeBasis

REGISTER_NAMES = ("x", "y", "z")


class RestorationError(RuntimeError):
    pass


class OffsetNotFoundError(RuntimeError):
    pass


class SpaceLedger:
    """Cooperative free-space accounting: operations declare named
    allocations on scope entry and release them LIFO."""

    def __init__(self):
        self.current_free_bits = 0
        self.peak_free_bits = 0
        self._stack: list[tuple[str, int]] = []

    def push(self, label: str, bits: int) -> None:
        if bits < 0:
            raise ValueError("allocation must be non-negative")
        self._stack.append((label, bits))
        self.current_free_bits += bits
        if self.current_free_bits > self.peak_free_bits:
            self.peak_free_bits = self.current_free_bits

    def pop(self, label: str) -> None:
        if not self._stack:
            raise RuntimeError("ledger pop on empty stack")
        top_label, bits = self._stack.pop()
        if top_label != label:
            raise RuntimeError(f"ledger scopes must close LIFO: {top_label} != {label}")
        self.current_free_bits -= bits

    def scope(self, label: str, bits: int) -> "_LedgerScope":
        return _LedgerScope(self, label, bits)


class _LedgerScope:
    # plain enter/exit object: cheaper than contextmanager in the hot loop
    __slots__ = ("ledger", "label", "bits")

    def __init__(self, ledger: SpaceLedger, label: str, bits: int):
        self.ledger = ledger
        self.label = label
        self.bits = bits

    def __enter__(self):
        self.ledger.push(self.label, self.bits)
        return self

    def __exit__(self, *exc):
        self.ledger.pop(self.label)
        return False


def bits_for(n: int) -> int:
    """ceil(log2 n) for n >= 1."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 0


def register_pointer_bits(d: int, m: int) -> int:
    """Scratch to index into a register of d slots of log m-bit entries."""
    return bits_for(d * max(1, bits_for(m))) + 1


def tape_from_mode(mode: str, d: int, m: int, seed: int = 0) -> np.ndarray:
    """Initial contents for the three registers (3d values in Z_m)."""
    n = 3 * d
    if mode == "zeros":
        return np.zeros(n, dtype=np.int64)
    if mode == "max":
        return np.full(n, m - 1, dtype=np.int64)
    if mode == "alternating":
        out = np.zeros(n, dtype=np.int64)
        out[1::2] = m - 1
        return out
    if mode == "seeded-random":
        import random

        rng = random.Random(seed)
        return np.array([rng.randrange(m) for _ in range(n)], dtype=np.int64)
    raise ValueError(f"unknown tape mode {mode!r}")


class CatalyticState:
    """The three registers plus the restoration snapshot, oracle-call
    counter, and free-space ledger.

    Exclusively owned by one evaluation; never shared across threads.
    """

    def __init__(self, basis: PrimeBasis, d: int, tape: np.ndarray | None = None):
        self.basis = basis
        self.d = d
        m = basis.modulus
        if tape is None:
            tape = np.zeros(3 * d, dtype=np.int64)
        tape = np.asarray(tape, dtype=np.int64)
        if tape.shape != (3 * d,):
            raise ValueError(f"tape must hold 3*{d} values")
        if tape.min() < 0 or tape.max() >= m:
            raise ValueError("tape entries must lie in [0, m)")
        self.regs = {
            "x": tape[:d].copy(),
            "y": tape[d : 2 * d].copy(),
            "z": tape[2 * d :].copy(),
        }
        self.initial_snapshot = {k: v.copy() for k, v in self.regs.items()}
        self.oracle_calls = 0
        self.ledger = SpaceLedger()

    @property
    def x(self) -> np.ndarray:
        return self.regs["x"]

    @property
    def y(self) -> np.ndarray:
        return self.regs["y"]

    @property
    def z(self) -> np.ndarray:
        return self.regs["z"]

    def record_oracle_call(self) -> None:
        self.oracle_calls += 1

    def add_scaled(self, target: str, gamma: int, coords) -> None:
        """target += gamma * coords entrywise mod m; other registers
        untouched. coords may be an array or a streaming generator of
        exactly d values."""
        m = self.basis.modulus
        if isinstance(coords, np.ndarray):
            vec = coords
        else:
            vec = np.fromiter(coords, dtype=np.int64, count=-1)
        if vec.shape != (self.d,):
            raise ValueError(f"coordinate source must yield {self.d} values")
        reg = self.regs[target]
        np.add(reg, (gamma % m) * vec, out=reg)
        np.mod(reg, m, out=reg)

    def swap(self, a: str, b: str) -> None:
        if a == b:
            raise ValueError("swap needs two distinct registers")
        self.regs[a], self.regs[b] = self.regs[b], self.regs[a]

    def assert_restored(self, which=REGISTER_NAMES) -> tuple[bool, str | None]:
        """Bit-exact comparison against the construction-time snapshot;
        returns (ok, first difference description)."""
        for name in which:
            now = self.regs[name]
            then = self.initial_snapshot[name]
            if not np.array_equal(now, then):
                k = int(np.nonzero(now != then)[0][0])
                return False, f"register {name}[{k}]: {int(now[k])} != {int(then[k])}"
        return True, None

    def snapshot_dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for name in REGISTER_NAMES:
                fh.write(" ".join(str(int(v)) for v in self.regs[name]) + "\n")

    def snapshot_load(self, path: str) -> None:
        with open(path, encoding="utf-8") as fh:
            rows = [line.split() for line in fh if line.strip()]
        if len(rows) != 3:
            raise ValueError("snapshot file must hold exactly three registers")
        for name, row in zip(REGISTER_NAMES, rows):
            vals = np.array([int(v) for v in row], dtype=np.int64)
            if vals.shape != (self.d,):
                raise ValueError("snapshot register length mismatch")
            self.regs[name][:] = vals


# ---------------------------------------------------------------------------
# bit-level tape encoding (offset trick)


def slot_width(d: int, m: int) -> int:
    return math.ceil(math.log2(m)) + math.ceil(math.log2(max(d, 2))) + 1


@dataclass(frozen=True)
class TapeEncoding:
    """3d register slots of slot_width bits each plus the shared offset.

    Slot value x is a valid representative iff x < m * floor(2^B / m); it
    represents x mod m. decode inverts encode bit-exactly.
    """

    slots: tuple[int, ...]
    delta: int
    d: int
    m: int

    def values(self) -> np.ndarray:
        return np.array(self.slots, dtype=np.int64) % self.m


def encode_tape(raw_bits, d: int, m: int) -> TapeEncoding:
    """Interpret raw_bits (length 3d * slot_width, big-endian per slot) as
    3d slots and find the offset delta making every slot a valid
    representative after wraparound addition."""
    width = slot_width(d, m)
    n = 3 * d
    bits = list(raw_bits)
    if len(bits) != n * width:
        raise ValueError(f"raw tape must hold {n * width} bits")
    raw = [
        int("".join(str(b) for b in bits[i * width : (i + 1) * width]), 2)
        for i in range(n)
    ]
    space = 1 << width
    limit = (space // m) * m
    raw_arr = np.array(raw, dtype=np.int64)
    for delta in range(space):
        if np.all((raw_arr + delta) % space < limit):
            slots = tuple(int(v) for v in (raw_arr + delta) % space)
            return TapeEncoding(slots=slots, delta=delta, d=d, m=m)
    raise OffsetNotFoundError(
        "no valid offset exists; this violates the slot-width invariant"
    )


def decode_tape(enc: TapeEncoding) -> list[int]:
    width = slot_width(enc.d, enc.m)
    space = 1 << width
    out = []
    for slot in enc.slots:
        raw = (slot - enc.delta) % space
        out.extend(int(b) for b in format(raw, f"0{width}b"))
    return out
