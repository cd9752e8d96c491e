# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel for the inner (r, s) scan of the one-level algorithm."""

import numpy as np

cimport numpy as cnp


def scan_update(cnp.int64_t[::1] x, cnp.int64_t[::1] y, cnp.int64_t[::1] z,
                cnp.int64_t[:, ::1] v_mat, cnp.int64_t[:, ::1] w_mat,
                cnp.int64_t[:, ::1] f_idx, long long cond, long long coef,
                long long m):
    """For each (r, s): if <x, v_r> * <y, v_s> = cond (mod m), add
    coef * w_mat[f_idx[r, s]] into z (mod m). Returns the match count."""
    cdef Py_ssize_t nrows = v_mat.shape[0]
    cdef Py_ssize_t d = v_mat.shape[1]
    cdef Py_ssize_t r, s, k, row
    cdef long long acc1, acc2
    cdef long long c = coef % m
    cdef int matches = 0
    g1_arr = np.empty(nrows, dtype=np.int64)
    g2_arr = np.empty(nrows, dtype=np.int64)
    cdef cnp.int64_t[::1] g1 = g1_arr
    cdef cnp.int64_t[::1] g2 = g2_arr
    for r in range(nrows):
        acc1 = 0
        acc2 = 0
        for k in range(d):
            acc1 += v_mat[r, k] * x[k]
            acc2 += v_mat[r, k] * y[k]
        g1[r] = acc1 % m
        g2[r] = acc2 % m
    for r in range(nrows):
        for s in range(nrows):
            if (g1[r] * g2[s]) % m == cond:
                matches += 1
                row = f_idx[r, s]
                for k in range(d):
                    z[k] = (z[k] + c * w_mat[row, k]) % m
    return matches


cdef inline long long _dot_m(cnp.int64_t[::1] a, cnp.int64_t[::1] b,
                             long long m, Py_ssize_t d) nogil:
    cdef Py_ssize_t k
    cdef long long acc = 0
    for k in range(d):
        acc += a[k] * b[k]
    return acc % m


cdef inline void _add_row(cnp.int64_t[::1] tgt, cnp.int64_t[:, ::1] mat,
                          Py_ssize_t row, long long gamma, long long m,
                          Py_ssize_t d) nogil:
    cdef Py_ssize_t k
    for k in range(d):
        tgt[k] = (tgt[k] + gamma * mat[row, k]) % m


def leaf_invoke(cnp.int64_t[::1] x, cnp.int64_t[::1] y, cnp.int64_t[::1] z,
                cnp.int64_t[:, ::1] u_mat, cnp.int64_t[:, ::1] v_mat,
                cnp.int64_t[:, ::1] w_mat, cnp.int64_t[:, ::1] f_idx,
                Py_ssize_t a_val, Py_ssize_t b_val, long long gamma_star,
                cnp.int64_t[::1] units, cnp.int64_t[:, ::1] cond_tab,
                cnp.int64_t[:, ::1] inv_tab, long long m, int t):
    """One full bottom-level invocation where both hidden operands are known
    leaf values, replicating the register-update order of the Python path
    exactly: paired inner products (4 calls), then per (b, c) mask the two
    additive calls, the scan, and the two restoring calls.  Returns the
    number of oracle calls performed (4 + 4 * 4^t)."""
    cdef Py_ssize_t d = x.shape[0]
    cdef Py_ssize_t n = f_idx.shape[0]
    cdef long long tmp1, tmp2, tmp3, g1, g2, cond, inv_alpha, gb, gc, coef
    cdef Py_ssize_t bmask, cmask, r, s, k, row, pop
    cdef int calls = 0
    cdef int masks = 1 << t

    # paired inner products (the x/y swap only relabels the operands)
    tmp1 = _dot_m(x, y, m, d)
    _add_row(y, v_mat, a_val, 1, m, d); calls += 1
    tmp2 = _dot_m(y, x, m, d)
    _add_row(y, v_mat, a_val, m - 1, m, d); calls += 1
    _add_row(x, v_mat, b_val, 1, m, d); calls += 1
    tmp3 = _dot_m(y, x, m, d)
    _add_row(x, v_mat, b_val, m - 1, m, d); calls += 1
    g1 = ((tmp2 - tmp1) % m + m) % m
    g2 = ((tmp3 - tmp1) % m + m) % m
    cond = cond_tab[g1, g2]
    inv_alpha = inv_tab[g1, g2]

    g1_arr = np.empty(n, dtype=np.int64)
    g2_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] ip1 = g1_arr
    cdef cnp.int64_t[::1] ip2 = g2_arr

    for bmask in range(masks):
        for cmask in range(masks):
            gb = units[bmask]
            gc = units[cmask]
            _add_row(x, u_mat, a_val, gb, m, d); calls += 1
            _add_row(y, u_mat, b_val, gc, m, d); calls += 1
            pop = 0
            for k in range(t):
                pop += (bmask >> k) & 1
                pop += (cmask >> k) & 1
            coef = (gamma_star % m) * (m - 1 if pop & 1 else 1) % m
            coef = coef * inv_alpha % m
            for r in range(n):
                ip1[r] = _dot_m(v_mat[r], x, m, d)
                ip2[r] = _dot_m(v_mat[r], y, m, d)
            for r in range(n):
                for s in range(n):
                    if (ip1[r] * ip2[s]) % m == cond:
                        row = f_idx[r, s]
                        for k in range(d):
                            z[k] = (z[k] + coef * w_mat[row, k]) % m
            _add_row(x, u_mat, a_val, (m - gb) % m, m, d); calls += 1
            _add_row(y, u_mat, b_val, (m - gc) % m, m, d); calls += 1
    return calls
