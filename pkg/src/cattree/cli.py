"""Command-line front end: instance generation, solving (brute-force or
catalytic), family verification, CIR/PIR checks, and a kernel benchmark.

Exit codes: 0 success, 2 verification failure, 3 restoration failure,
4 input error.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
import time

import numpy as np

from . import _kernel
from .cir import cir_retrieve, cm_cir, make_pir, mv_cir, pir_privacy_check, pir_retrieve
from .machine import CatalyticState, RestorationError, slot_width, tape_from_mode
from .modmath import PrimeBasis
from .mv import build_family, select_params, verify_family
from .tree import (
    ParseError,
    StatsRecord,
    analytic_call_count,
    eval_bruteforce,
    eval_catalytic,
    gen_random_instance,
    parse_instance,
    reduce_fanin,
    serialize_instance,
)

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_RESTORE = 3
EXIT_INPUT = 4

TAPE_MODES = ("seeded-random", "zeros", "max", "alternating")


def default_seed() -> int:
    return int(os.environ.get("CATTREE_SEED", "0"))


def _parse_primes(text: str) -> PrimeBasis:
    try:
        return PrimeBasis(tuple(int(p) for p in text.split(",")))
    except ValueError as exc:
        raise SystemExit_input(f"bad --primes value {text!r}: {exc}")


class SystemExit_input(SystemExit):
    def __init__(self, msg: str):
        print(f"error: {msg}", file=sys.stderr)
        super().__init__(EXIT_INPUT)


def _load_instance(args):
    if args.instance:
        try:
            with open(args.instance) as fh:
                return parse_instance(fh.read()), args.instance
        except OSError as exc:
            raise SystemExit_input(str(exc))
        except ParseError as exc:
            raise SystemExit_input(f"{args.instance}: {exc}")
    name = f"gen(h={args.h},ell={args.ell},r={args.fanin},seed={args.seed})"
    return gen_random_instance(args.h, args.ell, args.fanin, args.seed), name


def cmd_gen(args) -> int:
    inst = gen_random_instance(args.h, args.ell, args.fanin, args.seed)
    out = args.out or f"tree_h{args.h}_ell{args.ell}_r{args.fanin}_s{args.seed}.txt"
    try:
        with open(out, "w") as fh:
            fh.write(serialize_instance(inst))
    except OSError as exc:
        raise SystemExit_input(str(exc))
    print(f"{out} n={inst.input_size()}")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst, name = _load_instance(args)
    if args.mode == "brute":
        value = eval_bruteforce(inst)
        print(f"value={value:x}")
        return EXIT_OK
    basis = _parse_primes(args.primes)
    if inst.fanin > 2:
        inst = reduce_fanin(inst)
    family = build_family(inst.ell, basis)
    m = basis.modulus
    d = family.dim
    tape = tape_from_mode(args.tape, d, m, args.seed)
    state = CatalyticState(basis, d, tape)
    t0 = time.perf_counter()
    try:
        value = eval_catalytic(inst, family, state)
    except RestorationError as exc:
        print(f"restoration failure: {exc}", file=sys.stderr)
        return EXIT_RESTORE
    wall_ms = int((time.perf_counter() - t0) * 1000)
    rec = StatsRecord(
        instance=name.replace(" ", "_"),
        h=inst.h,
        ell=inst.ell,
        t=basis.t,
        m=m,
        d=d,
        oracle_calls=state.oracle_calls,
        peak_free_bits=state.ledger.peak_free_bits,
        catalytic_bits=3 * d * slot_width(d, m),
        wall_time_ms=wall_ms,
        restored=True,
        value_hex=f"{value:x}",
    )
    line = rec.to_line()
    print(line)
    if args.stats:
        try:
            with open(args.stats, "a") as fh:
                fh.write(line + "\n")
        except OSError as exc:
            raise SystemExit_input(str(exc))
    if args.check:
        expect = eval_bruteforce(inst)
        if value != expect:
            print(f"mismatch: catalytic={value:x} brute={expect:x}", file=sys.stderr)
            return EXIT_VERIFY
    if state.oracle_calls != analytic_call_count(inst.h, basis.t):
        print("oracle-call count off the closed form", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_mvcheck(args) -> int:
    basis = _parse_primes(args.primes)
    family = build_family(args.ell, basis)
    report = verify_family(family, mode=args.mode, seed=args.seed)
    if report.ok:
        print(f"mvcheck pass: size={family.size} d={family.dim} m={basis.modulus}")
        return EXIT_OK
    print(f"mvcheck FAIL: {report.violation}", file=sys.stderr)
    return EXIT_VERIFY


def cmd_cirtest(args) -> int:
    rng = random.Random(args.seed)
    if args.scheme == "mv":
        basis = _parse_primes(args.primes)
        params = select_params(args.ell, basis)
        family = build_family(args.ell, basis)
        scheme = mv_cir(params, family)
    else:
        scheme = cm_cir(args.ell)
    n = scheme.n_db
    db = [scheme.random_element(rng) for _ in range(n * n)]
    masks = [(scheme.zero(), scheme.zero())]
    masks += [
        (scheme.random_element(rng), scheme.random_element(rng))
        for _ in range(args.masks)
    ]
    for a in range(n):
        for b in range(n):
            for x, y in masks:
                got = cir_retrieve(scheme, db, a, b, x, y)
                if not np.array_equal(got, db[a * n + b]):
                    print(f"cirtest FAIL at a={a} b={b}", file=sys.stderr)
                    return EXIT_VERIFY
    print(
        f"cirtest pass: scheme={scheme.name} n_db={n} servers={scheme.servers} "
        f"masks={len(masks)}"
    )
    return EXIT_OK


def cmd_pirdemo(args) -> int:
    basis = _parse_primes(args.primes)
    family = build_family(1, basis, size=args.n)
    rng = random.Random(args.seed)
    q = args.q
    db = [rng.randrange(q if q else 7) for _ in range(args.n)]
    scheme = make_pir(family, db, q=q)
    m = basis.modulus
    for i_star in range(args.n):
        for _ in range(args.trials):
            r = np.array([rng.randrange(m) for _ in range(family.dim)], dtype=np.int64)
            if pir_retrieve(scheme, i_star, r) != db[i_star]:
                print(f"pirdemo FAIL: correctness at i*={i_star}", file=sys.stderr)
                return EXIT_VERIFY
    if not pir_privacy_check(scheme):
        print("pirdemo FAIL: privacy enumeration", file=sys.stderr)
        return EXIT_VERIFY
    print(f"pirdemo pass: N={args.n} q={scheme.q} servers={2**basis.t}")
    return EXIT_OK


def cmd_bench(args) -> int:
    basis = _parse_primes(args.primes)
    kernels = [("numpy", _kernel.scan_update_py)]
    if _kernel.HAVE_COMPILED:
        kernels.append(("compiled", _kernel.scan_update_c))
    else:
        print("compiled kernel unavailable; benchmarking the fallback only")
    family = build_family(args.ell, basis)
    m = basis.modulus
    d = family.dim
    for name, kern in kernels:
        times = []
        for run in range(args.runs):
            inst = gen_random_instance(args.h, args.ell, 2, seed=args.seed + run)
            tape = tape_from_mode("seeded-random", d, m, args.seed + run)
            state = CatalyticState(basis, d, tape)
            t0 = time.perf_counter()
            eval_catalytic(inst, family, state, kernel=kern)
            times.append(time.perf_counter() - t0)
        print(
            f"{name}: runs={args.runs} best={min(times) * 1000:.1f}ms "
            f"mean={sum(times) / len(times) * 1000:.1f}ms"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cattree")
    sub = ap.add_subparsers(dest="command", required=True)
    seed = default_seed()

    g = sub.add_parser("gen", help="generate a random instance file")
    g.add_argument("--h", type=int, required=True)
    g.add_argument("--ell", type=int, required=True)
    g.add_argument("--fanin", type=int, default=2)
    g.add_argument("--seed", type=int, default=seed)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="evaluate an instance")
    s.add_argument("--instance")
    s.add_argument("--h", type=int, default=2)
    s.add_argument("--ell", type=int, default=2)
    s.add_argument("--fanin", type=int, default=2)
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--mode", choices=("brute", "catalytic"), default="catalytic")
    s.add_argument("--primes", default="3,5")
    s.add_argument("--tape", choices=TAPE_MODES, default="seeded-random")
    s.add_argument("--stats", help="append the stats line to this file")
    s.add_argument("--check", action="store_true", help="compare against brute force")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("mvcheck", help="verify a matching-vector family")
    v.add_argument("--ell", type=int, required=True)
    v.add_argument("--primes", default="3,5")
    v.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
    v.add_argument("--seed", type=int, default=seed)
    v.set_defaults(func=cmd_mvcheck)

    c = sub.add_parser("cirtest", help="check a retrieval scheme exhaustively")
    c.add_argument("--scheme", choices=("mv", "cm"), default="mv")
    c.add_argument("--ell", type=int, required=True)
    c.add_argument("--primes", default="3")
    c.add_argument("--masks", type=int, default=10)
    c.add_argument("--seed", type=int, default=seed)
    c.set_defaults(func=cmd_cirtest)

    p = sub.add_parser("pirdemo", help="multi-server retrieval demo + privacy check")
    p.add_argument("--primes", default="3")
    p.add_argument("--q", type=int)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=seed)
    p.set_defaults(func=cmd_pirdemo)

    b = sub.add_parser("bench", help="compare the scan kernels")
    b.add_argument("--h", type=int, default=2)
    b.add_argument("--ell", type=int, default=2)
    b.add_argument("--primes", default="3,5")
    b.add_argument("--runs", type=int, default=3)
    b.add_argument("--seed", type=int, default=seed)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit_input as exc:
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
