# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Metropolis kernel for grid annealing (hot loop of `anneal`).

Mirrors _anneal_np.run_moves move for move; the pure-Python module is the
fallback when this extension is not built.  The interaction field
F(c) = sum_j chi_j T(c - j) is maintained incrementally: a proposal costs
O(1); an accepted flip pays the O(n^2) field update.
"""

from libc.math cimport exp


cdef inline double _flip_delta(unsigned char[:, ::1] cells,
                               double[:, ::1] field, double table_sum,
                               double coupling, double pref, double delta,
                               int n, int i, int j) nogil:
    cdef int im, ip, jm, jp, differing
    cdef double W, d_nl, d_per
    cdef unsigned char c = cells[i, j]
    if c:
        W = table_sum - field[i, j]
    else:
        W = field[i, j]
    d_nl = 2.0 * (table_sum - 2.0 * W)
    im = i - 1
    if im < 0:
        im += n
    ip = i + 1
    if ip >= n:
        ip -= n
    jm = j - 1
    if jm < 0:
        jm += n
    jp = j + 1
    if jp >= n:
        jp -= n
    differing = 0
    if cells[im, j] != c:
        differing += 1
    if cells[ip, j] != c:
        differing += 1
    if cells[i, jm] != c:
        differing += 1
    if cells[i, jp] != c:
        differing += 1
    d_per = delta * (4 - 2 * differing)
    return pref * (coupling * d_per - d_nl)


cdef inline void _apply_flip(unsigned char[:, ::1] cells,
                             double[:, ::1] field, double[:, ::1] table,
                             int n, int i, int j) nogil:
    cdef int a, b, da, db
    cdef double sign
    if cells[i, j]:
        sign = -1.0
        cells[i, j] = 0
    else:
        sign = 1.0
        cells[i, j] = 1
    for a in range(n):
        da = a - i
        if da < 0:
            da += n
        for b in range(n):
            db = b - j
            if db < 0:
                db += n
            field[a, b] += sign * table[da, db]


def run_moves(unsigned char[:, ::1] cells, double[:, ::1] field,
              double[:, ::1] table, double table_sum,
              double coupling, double pref, double delta,
              int[::1] mi, int[::1] mj, signed char[::1] kinds,
              int[::1] sizes, int[::1] sizes2, double[::1] uniforms,
              double[::1] temps, double energy):
    """Apply a batch of Metropolis moves in place; returns (energy, accepted).

    kinds: 0 single flip, 1 size x size patch, 2 band of `size` rows
    spanning the torus, 3 the same for columns, 4 a run of `size` cells
    within one row, 5 within one column, 6 a size x size2 rectangle.
    """
    cdef int n = cells.shape[0]
    cdef Py_ssize_t nmoves = mi.shape[0]
    cdef Py_ssize_t m
    cdef int i, j, a, b, bi, bj, h, w, size, accepted = 0
    cdef double dE, dEb, T
    for m in range(nmoves):
        i = mi[m]
        j = mj[m]
        T = temps[m]
        if kinds[m] == 0:
            dE = _flip_delta(cells, field, table_sum, coupling, pref, delta,
                             n, i, j)
            if dE <= 0.0 or uniforms[m] < exp(-dE / T):
                _apply_flip(cells, field, table, n, i, j)
                energy += dE
                accepted += 1
        else:
            size = sizes[m]
            if kinds[m] == 1:
                h = size
                w = size
            elif kinds[m] == 2:
                h = size
                w = n
            elif kinds[m] == 3:
                h = n
                w = size
            elif kinds[m] == 4:
                h = 1
                w = size
            elif kinds[m] == 5:
                h = size
                w = 1
            else:
                h = size
                w = sizes2[m]
            dEb = 0.0
            for bi in range(h):
                for bj in range(w):
                    a = i + bi
                    if a >= n:
                        a -= n
                    b = j + bj
                    if b >= n:
                        b -= n
                    dEb += _flip_delta(cells, field, table_sum, coupling,
                                       pref, delta, n, a, b)
                    _apply_flip(cells, field, table, n, a, b)
            if dEb <= 0.0 or uniforms[m] < exp(-dEb / T):
                energy += dEb
                accepted += 1
            else:
                for bi in range(h):
                    for bj in range(w):
                        a = i + bi
                        if a >= n:
                            a -= n
                        b = j + bj
                        if b >= n:
                            b -= n
                        _apply_flip(cells, field, table, n, a, b)
    return energy, accepted
