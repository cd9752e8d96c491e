"""Catalytic tree evaluation over matching-vector families: exact modular
simulator, verification oracles, retrieval schemes, and a CLI."""

from ._kernel import HAVE_COMPILED
from .machine import CatalyticState, RestorationError, SpaceLedger
from .modmath import PrimeBasis, crt_combine
from .mv import MvFamily, build_family, select_params, verify_family
from .onelevel import one_level_call_count, one_level_update
from .tree import (
    TreeEvalInstance,
    analytic_call_count,
    eval_bruteforce,
    eval_catalytic,
    gen_random_instance,
    parse_instance,
    reduce_fanin,
    serialize_instance,
)

__version__ = "0.1.0"

__all__ = [
    "HAVE_COMPILED",
    "CatalyticState",
    "RestorationError",
    "SpaceLedger",
    "PrimeBasis",
    "crt_combine",
    "MvFamily",
    "build_family",
    "select_params",
    "verify_family",
    "one_level_call_count",
    "one_level_update",
    "TreeEvalInstance",
    "analytic_call_count",
    "eval_bruteforce",
    "eval_catalytic",
    "gen_random_instance",
    "parse_instance",
    "reduce_fanin",
    "serialize_instance",
    "__version__",
]
