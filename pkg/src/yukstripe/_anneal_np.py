"""Pure-numpy Metropolis kernel for grid annealing.

Same move semantics and RNG-stream consumption as the compiled kernel in
_anneal_cy; selected automatically when the extension is unavailable.
Both maintain the interaction field F(c) = sum_j chi_j T(c - j)
incrementally, so a proposal costs O(1) and only accepted flips pay the
O(n^2) field update.  The engines can differ in the last floating-point
bits of an energy delta (different summation order), so runs are
bit-reproducible per engine, not across engines.
"""

import math

import numpy as np


def make_field(cells, table):
    """F(c) = sum_j chi_j T(c - j), via FFT correlation (table[0,0] = 0)."""
    ft = np.fft.fft2(table)
    fc = np.fft.fft2(cells.astype(float))
    return np.real(np.fft.ifft2(ft * fc))


def _flip_delta(cells, field, table_sum, coupling, pref, delta, i, j):
    n = cells.shape[0]
    c = cells[i, j]
    W = field[i, j] if not c else table_sum - field[i, j]
    d_nl = 2.0 * (table_sum - 2.0 * W)
    differing = int(cells[(i - 1) % n, j] != c) + int(cells[(i + 1) % n, j] != c) \
        + int(cells[i, (j - 1) % n] != c) + int(cells[i, (j + 1) % n] != c)
    d_per = delta * (4 - 2 * differing)
    return pref * (coupling * d_per - d_nl)


def _apply_flip(cells, field, table, i, j):
    n = cells.shape[0]
    sign = -1.0 if cells[i, j] else 1.0
    cells[i, j] = not cells[i, j]
    ar = np.arange(n)
    rows = (ar - i) % n
    cols = (ar - j) % n
    field += sign * table[np.ix_(rows, cols)]


def _patch_shape(kind, size, size2, n):
    if kind == 1:
        return size, size
    if kind == 2:
        return size, n
    if kind == 3:
        return n, size
    if kind == 4:
        return 1, size
    if kind == 5:
        return size, 1
    return size, size2


def run_moves(cells, field, table, table_sum, coupling, pref, delta,
              mi, mj, kinds, sizes, sizes2, uniforms, temps, energy):
    """Apply a batch of Metropolis moves in place.

    Returns (energy, accepted).  kinds[m] selects the proposal anchored
    at (mi[m], mj[m]) with extent sizes[m]: 0 a single-cell flip, 1 a
    size x size patch, 2 a band of `size` rows spanning the torus, 3 the
    same for columns, 4 a run of `size` cells within one row, 5 within
    one column, 6 a size x size2 rectangle.  Patch deltas telescope over
    sequential exact single-cell deltas.
    """
    n = cells.shape[0]
    accepted = 0
    for m in range(len(mi)):
        i, j, T = int(mi[m]), int(mj[m]), float(temps[m])
        kind = int(kinds[m])
        if kind == 0:
            dE = _flip_delta(cells, field, table_sum, coupling, pref, delta, i, j)
            if dE <= 0.0 or uniforms[m] < math.exp(-dE / T):
                _apply_flip(cells, field, table, i, j)
                energy += dE
                accepted += 1
        else:
            h, w = _patch_shape(kind, int(sizes[m]), int(sizes2[m]), n)
            coords = [((i + bi) % n, (j + bj) % n)
                      for bi in range(h) for bj in range(w)]
            dEb = 0.0
            for (a, b) in coords:
                dEb += _flip_delta(cells, field, table_sum, coupling, pref,
                                   delta, a, b)
                _apply_flip(cells, field, table, a, b)
            if dEb <= 0.0 or uniforms[m] < math.exp(-dEb / T):
                energy += dEb
                accepted += 1
            else:
                for (a, b) in coords:
                    _apply_flip(cells, field, table, a, b)
    return energy, accepted
