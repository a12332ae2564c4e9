"""Exact integer elimination primitives.

Everything here works on Python ints, which are arbitrary precision, so
no intermediate result can overflow or pick up rounding error.  The
public entry points are ``integer_rank`` and ``integer_kernel_basis``;
both run the same fraction-free column elimination.
"""

from math import gcd

import numpy as np


def _as_int_columns(mat):
    """Return (columns, n_rows) with each column a list of Python ints."""
    arr = np.asarray(mat)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, d = arr.shape
    return [[int(arr[r, j]) for r in range(n)] for j in range(d)], n


def _column_echelon(cols, n_rows):
    """Reduce the top ``n_rows`` block of ``cols`` to column echelon form.

    Uses unimodular column operations only (swap, subtract integer
    multiples), so the integer span of the columns is preserved.  Rows
    above the current one are already zero in every non-pivot column,
    hence updates can start at the current row.  Returns the pivot
    count, i.e. the rank of the top block.
    """
    pivots = 0
    for r in range(n_rows):
        active = [j for j in range(pivots, len(cols)) if cols[j][r] != 0]
        while len(active) > 1:
            # Reduce against the column with the smallest nonzero entry
            # in this row; Euclidean shrinking terminates quickly.
            jmin = min(active, key=lambda j: abs(cols[j][r]))
            pivot_val = cols[jmin][r]
            still = []
            for j in active:
                if j == jmin:
                    continue
                q = cols[j][r] // pivot_val
                if q:
                    col, piv = cols[j], cols[jmin]
                    for i in range(r, len(col)):
                        col[i] -= q * piv[i]
                if cols[j][r] != 0:
                    still.append(j)
            still.append(jmin)
            active = still
        if active:
            j = active[0]
            cols[pivots], cols[j] = cols[j], cols[pivots]
            pivots += 1
    return pivots


def integer_rank(mat):
    """Rank of an integer matrix, computed exactly."""
    cols, n = _as_int_columns(mat)
    if not cols or n == 0:
        return 0
    return _column_echelon(cols, n)


def make_primitive(vec):
    """Divide out the entry gcd and make the first nonzero entry positive."""
    g = 0
    for v in vec:
        g = gcd(g, abs(v))
    if g == 0:
        return list(vec)
    out = [v // g for v in vec]
    for v in out:
        if v != 0:
            if v < 0:
                out = [-x for x in out]
            break
    return out


def integer_kernel_basis(mat):
    """Integer basis of the rational kernel of ``mat``.

    Eliminates the stacked matrix [mat; I] by columns: once the top
    block of a column is zeroed, its bottom block is an exact integer
    kernel vector.  Returns a list of primitive, sign-normalized
    vectors of length ``mat.shape[1]``; the list has exactly
    ``d - rank(mat)`` elements and full rank by construction (the
    bottom block starts as the identity and only unimodular column
    operations are applied).
    """
    arr = np.asarray(mat)
    n, d = arr.shape
    cols = [[int(arr[r, j]) for r in range(n)] + [0] * d for j in range(d)]
    for j in range(d):
        cols[j][n + j] = 1
    pivots = _column_echelon(cols, n)
    kernel = []
    for j in range(pivots, d):
        if any(cols[j][r] != 0 for r in range(n)):  # pragma: no cover
            raise AssertionError("column echelon left a nonzero top block")
        kernel.append(make_primitive(cols[j][n:]))
    return kernel


def exact_matvec(mat, vec):
    """mat @ vec with Python-int arithmetic; returns a list of ints."""
    arr = np.asarray(mat)
    n, d = arr.shape
    xs = [int(v) for v in vec]
    return [sum(int(arr[r, j]) * xs[j] for j in range(d)) for r in range(n)]
