"""Pure-Python (numpy) fallback for the inner (r, s) scan of the one-level
algorithm. Must agree coordinate-for-coordinate with the compiled kernel."""

from __future__ import annotations

import numpy as np


def scan_update(x, y, z, v_mat, w_mat, f_idx, cond, coef, m):
    """For each (r, s): if <x, v_r> * <y, v_s> = cond (mod m), add
    coef * w_mat[f_idx[r, s]] into z (mod m). Returns the match count."""
    g1 = (v_mat @ x) % m
    g2 = (v_mat @ y) % m
    hit = np.outer(g1, g2) % m == cond
    n = int(hit.sum())
    if n:
        rows = f_idx[hit]
        np.add(z, coef * w_mat[rows].sum(axis=0), out=z)
        np.mod(z, m, out=z)
    return n
