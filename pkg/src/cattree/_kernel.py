"""Kernel selection: the compiled scan if the extension built, else the
numpy fallback. Both implementations are importable for cross-checks and
benchmarks."""

from ._scan_py import scan_update as scan_update_py

try:
    from ._scan_c import leaf_invoke, scan_update as scan_update_c

    HAVE_COMPILED = True
    scan_update = scan_update_c
except ImportError:  # pragma: no cover - depends on the build environment
    HAVE_COMPILED = False
    scan_update_c = None
    leaf_invoke = None
    scan_update = scan_update_py

__all__ = [
    "scan_update",
    "scan_update_py",
    "scan_update_c",
    "leaf_invoke",
    "HAVE_COMPILED",
]
