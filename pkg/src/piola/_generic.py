"""Small dense linear algebra that works on any scalar type.

Matrices are numpy ``object`` arrays holding Python floats or
:class:`~piola.dual.DualScalar`.  Every routine performs its operations in
a fixed order so that dual-number runs reproduce float runs bit-for-bit in
their value components.  Sizes here are tiny (d <= 8), so clarity wins over
speed.
"""

from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np

from piola import dual


def as_obj(a) -> np.ndarray:
    """Copy ``a`` into an object array of Python floats / duals."""
    arr = np.asarray(a)
    if arr.dtype == object:
        out = np.empty(arr.shape, dtype=object)
        for idx, v in np.ndenumerate(arr):
            out[idx] = v if isinstance(v, dual.DualScalar) else float(v)
        return out
    return arr.astype(float).astype(object)


def values(a) -> np.ndarray:
    """Float array of the value components."""
    arr = np.asarray(a, dtype=object)
    try:
        # DualScalar has no __float__, so this only succeeds for plain numbers
        return arr.astype(float)
    except TypeError:
        pass
    return np.vectorize(dual.value_of, otypes=[float])(arr) if arr.size else arr.astype(float)


def derivatives(a) -> np.ndarray:
    arr = np.asarray(a, dtype=object)
    return np.vectorize(dual.derivative_of, otypes=[float])(arr) if arr.size else arr.astype(float)


def zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(0.0)
    return out


def identity(n: int) -> np.ndarray:
    out = zeros((n, n))
    for i in range(n):
        out[i, i] = 1.0
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = a.shape
    m2, p = b.shape
    if m != m2:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    out = np.empty((n, p), dtype=object)
    for i in range(n):
        for j in range(p):
            s = a[i, 0] * b[0, j]
            for k in range(1, m):
                s = s + a[i, k] * b[k, j]
            out[i, j] = s
    return out


def matvec(a: np.ndarray, v) -> np.ndarray:
    return matmul(a, np.asarray(v, dtype=object).reshape(-1, 1)).reshape(-1)


def det(a: np.ndarray):
    """Determinant by Laplace expansion along the first row."""
    n = a.shape[0]
    return minor(a, tuple(range(n)), tuple(range(n)))


def minor(a: np.ndarray, rows: tuple, cols: tuple):
    """Determinant of ``a[rows][:, cols]`` without building the submatrix."""
    n = len(rows)
    if n == 0:
        return 1.0
    if n == 1:
        return a[rows[0], cols[0]]
    if n == 2:
        return a[rows[0], cols[0]] * a[rows[1], cols[1]] - a[rows[0], cols[1]] * a[rows[1], cols[0]]
    total = 0.0
    rest = rows[1:]
    for j, c in enumerate(cols):
        term = a[rows[0], c] * minor(a, rest, cols[:j] + cols[j + 1:])
        total = total + term if j % 2 == 0 else total - term
    return total


def multi_indices(d: int, k: int) -> list[tuple[int, ...]]:
    """Strictly increasing k-subsets of range(d) in lexicographic order."""
    return list(combinations(range(d), k))


def compound(a: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: entry (J, I) is the minor with rows J, cols I."""
    n, m = a.shape
    rows = multi_indices(n, k)
    cols = multi_indices(m, k)
    out = np.empty((comb(n, k), comb(m, k)), dtype=object)
    for r, J in enumerate(rows):
        for c, I in enumerate(cols):
            out[r, c] = minor(a, J, I)
    return out


def cholesky(g: np.ndarray, pivot_floor: float = 0.0) -> np.ndarray:
    """Lower-triangular L with ``g = L L^T``; raises on a non-positive pivot."""
    n = g.shape[0]
    L = zeros((n, n))
    for j in range(n):
        s = g[j, j]
        for k in range(j):
            s = s - L[j, k] * L[j, k]
        if not dual.value_of(s) > pivot_floor:
            raise np.linalg.LinAlgError(f"matrix not positive definite (pivot {dual.value_of(s)!r})")
        L[j, j] = dual.sqrt(s)
        for i in range(j + 1, n):
            t = g[i, j]
            for k in range(j):
                t = t - L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    return L


def lower_inverse(L: np.ndarray) -> np.ndarray:
    """Inverse of a lower-triangular matrix by forward substitution."""
    n = L.shape[0]
    inv = zeros((n, n))
    for c in range(n):
        for i in range(c, n):
            s = 1.0 if i == c else 0.0
            for k in range(c, i):
                s = s - L[i, k] * inv[k, c]
            inv[i, c] = s / L[i, i]
    return inv


def spd_inverse(g: np.ndarray) -> np.ndarray:
    Linv = lower_inverse(cholesky(g))
    return matmul(Linv.T.copy(), Linv)


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting on values (generic scalars)."""
    a = a.copy()
    b = b.copy().reshape(a.shape[0], -1)
    n = a.shape[0]
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(dual.value_of(a[r, c])))
        if dual.value_of(a[p, c]) == 0.0:
            raise np.linalg.LinAlgError("singular matrix")
        if p != c:
            a[[c, p]] = a[[p, c]]
            b[[c, p]] = b[[p, c]]
        for r in range(c + 1, n):
            f = a[r, c] / a[c, c]
            for k in range(c, n):
                a[r, k] = a[r, k] - f * a[c, k]
            for k in range(b.shape[1]):
                b[r, k] = b[r, k] - f * b[c, k]
    x = zeros(b.shape)
    for r in reversed(range(n)):
        for k in range(b.shape[1]):
            s = b[r, k]
            for j in range(r + 1, n):
                s = s - a[r, j] * x[j, k]
            x[r, k] = s / a[r, r]
    return x


def permutation_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign
