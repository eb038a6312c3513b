"""Multilinear algebra on oriented inner-product spaces.

Everything here is pointwise linear algebra: k-vectors, wedge products,
the induced maps on exterior powers, Hodge duals, and the intrinsic
determinant and cofactor of a linear map between two oriented
inner-product spaces of the same dimension.

Vectors are written in a *working basis* ``e_0 .. e_{d-1}`` whose Gram
matrix is ``G``.  k-vector coefficients are indexed by strictly increasing
multi-indices in lexicographic order, so the matrix of the induced map on
the k-th exterior power is literally the matrix of k x k minors.

All routines are generic over the scalar type: Gram matrices and map
coefficients may hold floats or :class:`~piola.dual.DualScalar` values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from typing import Sequence

import numpy as np

from piola import _generic as gen
from piola import dual

__all__ = [
    "OrientedInnerProductSpace", "KVector", "LinearMap", "SpaceError",
    "wedge", "wedge_power_map", "hodge_matrix", "hodge_star", "volume_element",
    "induced_gram", "kvector_inner", "intrinsic_det", "intrinsic_cof",
    "metric_transpose", "laplace_check", "restricted_det_check",
    "derivation_matrix", "matrix_cofactor",
]

SYMMETRY_TOL = 1e-12
PIVOT_FLOOR = 1e-10


class SpaceError(ValueError):
    """Gram matrix is not symmetric positive definite, or spaces mismatch."""


@dataclass(frozen=True, eq=False)
class OrientedInnerProductSpace:
    """Finite-dimensional inner-product space with a fixed orientation.

    ``orientation`` is +1 when the working basis is positively oriented and
    -1 otherwise; it is never inferred.
    """

    gram: np.ndarray
    orientation: int = 1

    def __post_init__(self):
        g = gen.as_obj(self.gram)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
            raise SpaceError(f"Gram matrix must be square, got shape {g.shape}")
        if self.orientation not in (1, -1):
            raise SpaceError("orientation must be +1 or -1")
        gv = gen.values(g)
        if np.max(np.abs(gv - gv.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(gv))):
            raise SpaceError("Gram matrix is not symmetric")
        object.__setattr__(self, "gram", g)
        try:
            chol = gen.cholesky(g, PIVOT_FLOOR)
        except np.linalg.LinAlgError as exc:
            raise SpaceError(str(exc)) from exc
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def euclidean(cls, d: int, orientation: int = 1) -> "OrientedInnerProductSpace":
        return cls(np.eye(d), orientation)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @cached_property
    def frame(self) -> np.ndarray:
        """Positively oriented orthonormal basis as columns (in the working basis).

        With ``G = L L^T`` the frame is ``L^{-T}`` (upper triangular, positive
        diagonal); for a negatively oriented working basis its first column
        is flipped.
        """
        E = gen.lower_inverse(self._chol).T.copy()
        if self.orientation < 0:
            E[:, 0] = -E[:, 0]
        return E

    @cached_property
    def coframe(self) -> np.ndarray:
        """Inverse of :attr:`frame`: maps working coordinates to frame coordinates."""
        B = self._chol.T.copy()
        if self.orientation < 0:
            B[0, :] = -B[0, :]
        return B

    @cached_property
    def inverse_gram(self) -> np.ndarray:
        E = self.frame
        return gen.matmul(E, E.T.copy())

    def inner(self, u, v):
        u = gen.as_obj(u)
        v = gen.as_obj(v)
        return _dot(u, gen.matvec(self.gram, v))

    def norm(self, u):
        return dual.sqrt(self.inner(u, u))


def _dot(u, v):
    s = u[0] * v[0]
    for a, b in zip(u[1:], v[1:]):
        s = s + a * b
    return s


@dataclass(frozen=True, eq=False)
class KVector:
    space: OrientedInnerProductSpace
    degree: int
    coeffs: np.ndarray = field(repr=True)

    def __post_init__(self):
        d = self.space.dim
        if not 0 <= self.degree <= d:
            raise ValueError(f"degree {self.degree} outside 0..{d}")
        c = gen.as_obj(self.coeffs).reshape(-1)
        if c.shape[0] != comb(d, self.degree):
            raise ValueError(f"expected {comb(d, self.degree)} coefficients, got {c.shape[0]}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def basis(cls, space, indices: Sequence[int]) -> "KVector":
        """Basis k-vector ``e_{i1} ^ ... ^ e_{ik}`` (indices in any order)."""
        idx = list(indices)
        if len(set(idx)) != len(idx):
            return cls(space, len(idx), np.zeros(comb(space.dim, len(idx))))
        sign = gen.permutation_sign(idx)
        c = np.zeros(comb(space.dim, len(idx)))
        c[gen.multi_indices(space.dim, len(idx)).index(tuple(sorted(idx)))] = sign
        return cls(space, len(idx), c)

    @classmethod
    def vector(cls, space, components) -> "KVector":
        return cls(space, 1, components)

    def __add__(self, other: "KVector") -> "KVector":
        _same_space(self, other)
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        return KVector(self.space, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "KVector") -> "KVector":
        _same_space(self, other)
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        return KVector(self.space, self.degree, self.coeffs - other.coeffs)

    def __mul__(self, s) -> "KVector":
        return KVector(self.space, self.degree, self.coeffs * s)

    __rmul__ = __mul__


def _same_space(a, b):
    if a.space is not b.space:
        raise ValueError("k-vectors live in different spaces")


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Linear map ``source -> target``; ``matrix[alpha, i]`` is the
    ``alpha``-component of the image of the ``i``-th source basis vector."""

    source: OrientedInnerProductSpace
    target: OrientedInnerProductSpace
    matrix: np.ndarray

    def __post_init__(self):
        if self.source.dim != self.target.dim:
            raise SpaceError("source and target dimensions differ")
        m = gen.as_obj(self.matrix)
        if m.shape != (self.target.dim, self.source.dim):
            raise ValueError(f"matrix shape {m.shape} does not match spaces")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.source.dim

    def __call__(self, v):
        return gen.matvec(self.matrix, gen.as_obj(v))

    def compose(self, other: "LinearMap") -> "LinearMap":
        """``self o other``."""
        if other.target is not self.source:
            raise ValueError("composition through different middle spaces")
        return LinearMap(other.source, self.target, gen.matmul(self.matrix, other.matrix))


# --------------------------------------------------------------------------


def wedge(a: KVector, b: KVector) -> KVector:
    _same_space(a, b)
    d = a.space.dim
    k, l = a.degree, b.degree
    if k + l > d:
        raise ValueError(f"degree overflow: {k} + {l} > {d}")
    targets = {K: n for n, K in enumerate(gen.multi_indices(d, k + l))}
    out = gen.zeros(comb(d, k + l))
    for i, I in enumerate(gen.multi_indices(d, k)):
        for j, J in enumerate(gen.multi_indices(d, l)):
            if set(I) & set(J):
                continue
            sign = gen.permutation_sign(I + J)
            n = targets[tuple(sorted(I + J))]
            term = a.coeffs[i] * b.coeffs[j]
            out[n] = out[n] + term if sign > 0 else out[n] - term
    return KVector(a.space, k + l, out)


def wedge_power_map(A, k: int) -> np.ndarray:
    """Matrix of the map induced by ``A`` on k-vectors (the k-th compound)."""
    m = A.matrix if isinstance(A, LinearMap) else gen.as_obj(A)
    d = m.shape[0]
    if not 0 <= k <= d:
        raise ValueError(f"k={k} outside 0..{d}")
    return gen.compound(m, k)


def _complement_signs(d: int, k: int) -> np.ndarray:
    """Hodge matrix in an oriented orthonormal basis: e_I -> sgn(I, I^c) e_{I^c}."""
    src = gen.multi_indices(d, k)
    tgt = {K: n for n, K in enumerate(gen.multi_indices(d, d - k))}
    S = gen.zeros((comb(d, d - k), comb(d, k)))
    for c, I in enumerate(src):
        comp = tuple(i for i in range(d) if i not in I)
        S[tgt[comp], c] = float(gen.permutation_sign(I + comp))
    return S


def hodge_matrix(space: OrientedInnerProductSpace, k: int) -> np.ndarray:
    """Matrix of the Hodge dual on k-vectors, in working-basis coefficients.

    Computed as ``wedge^{d-k}(E) . S_k . wedge^k(E^{-1})`` where ``E`` is the
    oriented orthonormal frame and ``S_k`` the orthonormal complement rule.
    """
    d = space.dim
    if not 0 <= k <= d:
        raise ValueError(f"k={k} outside 0..{d}")
    # spaces are immutable, so the matrix is memoized on the instance
    cache = space.__dict__.setdefault("_hodge", {})
    if k not in cache:
        H = gen.matmul(
            gen.matmul(gen.compound(space.frame, d - k), _complement_signs(d, k)),
            gen.compound(space.coframe, k),
        )
        H.setflags(write=False)
        cache[k] = H
    return cache[k]


def hodge_star(space: OrientedInnerProductSpace, k: int, v: KVector) -> KVector:
    if v.space is not space:
        raise ValueError("k-vector does not belong to this space")
    if v.degree != k:
        raise ValueError(f"expected a {k}-vector, got degree {v.degree}")
    return KVector(space, space.dim - k, gen.matvec(hodge_matrix(space, k), v.coeffs))


def volume_element(space: OrientedInnerProductSpace) -> KVector:
    """Oriented unit d-vector (the Hodge dual of 1)."""
    return KVector(space, space.dim, hodge_matrix(space, 0)[:, 0])


def induced_gram(space: OrientedInnerProductSpace, k: int) -> np.ndarray:
    """Gram matrix of basis k-vectors: ``<e_I, e_J> = det G[I, J]``."""
    return gen.compound(space.gram, k)


def kvector_inner(a: KVector, b: KVector):
    _same_space(a, b)
    if a.degree != b.degree:
        raise ValueError("degree mismatch")
    return _dot(a.coeffs, gen.matvec(induced_gram(a.space, a.degree), b.coeffs))


def intrinsic_det(A: LinearMap):
    """``star_W^d o wedge^d A o star_V^0`` applied to 1."""
    d = A.dim
    M = gen.matmul(
        gen.matmul(hodge_matrix(A.target, d), wedge_power_map(A, d)),
        hodge_matrix(A.source, 0),
    )
    return M[0, 0]


def intrinsic_cof(A: LinearMap) -> LinearMap:
    """``(-1)^{d-1} star_W^{d-1} o wedge^{d-1} A o star_V^1`` as a map V -> W."""
    d = A.dim
    M = gen.matmul(
        gen.matmul(hodge_matrix(A.target, d - 1), wedge_power_map(A, d - 1)),
        hodge_matrix(A.source, 1),
    )
    if d % 2 == 0:
        M = -M
    return LinearMap(A.source, A.target, M)


def metric_transpose(A: LinearMap) -> LinearMap:
    """Adjoint ``W -> V``: matrix ``G_V^{-1} A^T G_W``."""
    M = gen.matmul(gen.matmul(A.source.inverse_gram, A.matrix.T.copy()), A.target.gram)
    return LinearMap(A.target, A.source, M)


def laplace_check(A: LinearMap) -> float:
    """``max(|A^T Cof A - Det A I|, |(Cof A)^T A - Det A I|)`` (max norm)."""
    C = intrinsic_cof(A)
    D = dual.value_of(intrinsic_det(A))
    I = np.eye(A.dim)
    left = gen.values(metric_transpose(A).compose(C).matrix)
    right = gen.values(metric_transpose(C).compose(A).matrix)
    return float(max(np.max(np.abs(left - D * I)), np.max(np.abs(right - D * I))))


def derivation_matrix(M, k: int) -> np.ndarray:
    """Action on k-vectors of the derivation extending the endomorphism M.

    ``v1^...^vk -> sum_s v1^..^M vs^..^vk``; obtained as the derivative of
    ``wedge^k(I + t M)`` at t = 0 via dual numbers.
    """
    M = gen.values(gen.as_obj(M))
    n = M.shape[0]
    seeded = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            seeded[i, j] = dual.DualScalar(1.0 if i == j else 0.0, M[i, j])
    return gen.derivatives(gen.compound(seeded, k))


def matrix_cofactor(m) -> np.ndarray:
    """Classical matrix of signed minors (generic scalars)."""
    m = gen.as_obj(m)
    n = m.shape[0]
    out = np.empty((n, n), dtype=object)
    if n == 1:
        out[0, 0] = 1.0
        return out
    for i in range(n):
        for j in range(n):
            rows = tuple(r for r in range(n) if r != i)
            cols = tuple(c for c in range(n) if c != j)
            minor = gen.minor(m, rows, cols)
            out[i, j] = minor if (i + j) % 2 == 0 else -minor
    return out


# --------------------------------------------------------------------------


def _oriented_complement_basis(space: OrientedInnerProductSpace, unit) -> np.ndarray:
    """Orthonormal basis of ``{unit}^perp`` with the orientation induced by ``unit``.

    Returns a ``d x (d-1)`` float array; ``(unit, columns)`` is a positively
    oriented orthonormal basis of the space.
    """
    G = gen.values(space.gram)
    d = space.dim
    u = np.asarray(unit, dtype=float)
    basis = [u]
    for cand in np.eye(d):
        w = cand.copy()
        for b in basis:
            w = w - (b @ G @ w) * b
        nrm = np.sqrt(w @ G @ w)
        if nrm > 1e-8:
            basis.append(w / nrm)
        if len(basis) == d:
            break
    B = np.column_stack(basis)
    if np.sign(np.linalg.det(B)) != space.orientation:
        B[:, -1] = -B[:, -1]
    return B[:, 1:]


def restricted_det_check(A: LinearMap, v_perp, w_perp, *, tol: float = 1e-10):
    """Residual of ``Cof A (v_perp) = Det(A|_{v_perp^perp}) w_perp``.

    Returns ``(residual, restricted_det)``.  ``v_perp`` and ``w_perp`` must be
    unit vectors and ``A`` must map ``{v_perp}^perp`` into ``{w_perp}^perp``.
    """
    d = A.dim
    if d < 2:
        raise ValueError("hyperplane restriction needs d >= 2")
    V, W = A.source, A.target
    v = np.asarray(v_perp, dtype=float)
    w = np.asarray(w_perp, dtype=float)
    GV, GW = gen.values(V.gram), gen.values(W.gram)
    if abs(v @ GV @ v - 1.0) > tol or abs(w @ GW @ w - 1.0) > tol:
        raise ValueError("v_perp and w_perp must be unit vectors")
    M = gen.values(A.matrix)
    Vb = _oriented_complement_basis(V, v)
    Wb = _oriented_complement_basis(W, w)
    images = M @ Vb
    leak = w @ GW @ images
    if np.max(np.abs(leak)) > tol * max(1.0, np.max(np.abs(M))):
        raise ValueError("map does not send the source hyperplane into the target hyperplane")
    restricted = Wb.T @ GW @ images
    rdet = float(dual.value_of(gen.det(gen.as_obj(restricted))))
    C = gen.values(intrinsic_cof(A).matrix)
    diff = C @ v - rdet * w
    return float(np.sqrt(max(diff @ GW @ diff, 0.0))), rdet
