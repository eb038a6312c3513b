"""Pointwise evaluation of the Piola identities for a map between charts.

The chart-level primitives (map components, metrics) are differentiated
symbolically.  Derived fields such as the intrinsic cofactor ``Cof df`` are
differentiated by running the exterior-algebra pipeline on dual numbers
seeded with those exact derivatives, so every residual below measures
rounding error only.

Index conventions: ``J[a, j] = d_j f^a``; cofactor matrices use the same
layout, ``C[a, i] = (Cof df)_i^a``; Christoffel arrays are ``G[k, i, j]``
with the upper index first.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from piola import _generic as gen
from piola import dual
from piola import expr as ex
from piola.chart import (
    Chart, ChartMap, VectorFieldOnChart, _dual_array, christoffel_at, metric_at,
)
from piola.dual import DualScalar
from piola.exterior import (
    LinearMap, OrientedInnerProductSpace, derivation_matrix, hodge_matrix,
    intrinsic_cof, intrinsic_det, matrix_cofactor, metric_transpose,
)

__all__ = [
    "PointState", "ResidualReport", "GuardSkip", "DIFFEO_GUARD",
    "point_state", "differential_at", "det_df_at", "coordinate_det_df_at",
    "cof_df_at", "cof_jet", "coordinate_cof_identity_residual",
    "covariant_derivative_cof_at", "coderivative_cof_at", "coderivative_cof_frame_at",
    "euclidean_div_cof", "piola_transform_at", "piola_transform_via_inverse",
    "divergence_at", "divergence_christoffel_at", "div_piola_at",
    "residual_marsden_hughes", "residual_generalized", "residual_coordinate",
    "christoffel_trace_residual", "residual_mh83_published",
    "MetricBundle", "TangentBundle", "FrameBundle", "DifferentialField", "SyntheticBundleMap",
    "check_cof_is_derivative_of_det", "det_directional_fd", "check_hodge_parallel",
]

DIFFEO_GUARD = 1e-6


class GuardSkip(Exception):
    """A check does not apply at this point (e.g. the map is not locally invertible)."""


@dataclass(frozen=True)
class ResidualReport:
    name: str
    residuals: np.ndarray
    points: np.ndarray
    tolerance: float
    skipped: int = 0
    lower_bound: bool = False  # pass iff residuals EXCEED tolerance (negative controls)
    note: str = ""

    @property
    def max(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.residuals)) if len(self.residuals) else 0.0

    @property
    def status(self) -> str:
        if len(self.residuals) == 0:
            return "skip"
        if self.lower_bound:
            return "pass" if float(np.min(self.residuals)) >= self.tolerance else "fail"
        return "pass" if self.max <= self.tolerance else "fail"


# --------------------------------------------------------------------------
# point data


@dataclass(frozen=True)
class PointState:
    p: np.ndarray
    J: np.ndarray
    hess: np.ndarray  # hess[a, j, i] = d_i d_j f^a
    fp: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    sqrt_g: float
    h: np.ndarray
    sqrt_h: float
    gamma_src: np.ndarray
    gamma_tgt: np.ndarray  # at f(p)
    dg: np.ndarray  # dg[k, i, j] at p
    dh: np.ndarray  # dh[c, a, b] at f(p)


@lru_cache(maxsize=16384)
def _state(mapping: ChartMap, key: tuple) -> PointState:
    p = np.array(key)
    fp = mapping.value(p)
    g = metric_at(mapping.source, p)
    h = metric_at(mapping.target, fp)
    st = PointState(
        p=p,
        J=mapping.jacobian(p),
        hess=mapping.hessian(p),
        fp=fp,
        g=g,
        g_inv=np.linalg.inv(g),
        sqrt_g=float(np.sqrt(np.linalg.det(g))),
        h=h,
        sqrt_h=float(np.sqrt(np.linalg.det(h))),
        gamma_src=christoffel_at(mapping.source, p),
        gamma_tgt=christoffel_at(mapping.target, fp),
        dg=mapping.source.metric_derivatives(p),
        dh=mapping.target.metric_derivatives(fp),
    )
    for arr in vars(st).values():
        if isinstance(arr, np.ndarray):
            arr.setflags(write=False)
    return st


def _key(p) -> tuple:
    return tuple(float(v) for v in p)


def point_state(mapping: ChartMap, p) -> PointState:
    return _state(mapping, _key(p))


def _seeded(st: PointState, v) -> tuple:
    """Dual J, g, h∘f seeded with exact derivatives along source direction ``v``."""
    v = np.asarray(v, dtype=float)
    J = _dual_array(st.J, st.hess @ v)
    g = _dual_array(st.g, np.tensordot(v, st.dg, axes=1))
    w = st.J @ v
    h = _dual_array(st.h, np.tensordot(w, st.dh, axes=1))
    return J, g, h


def _spaces(g, h):
    return OrientedInnerProductSpace(g), OrientedInnerProductSpace(h)


def _cof_matrix(J, g, h) -> np.ndarray:
    V, W = _spaces(g, h)
    return intrinsic_cof(LinearMap(V, W, J)).matrix


def differential_at(mapping: ChartMap, p) -> LinearMap:
    st = point_state(mapping, p)
    V, W = _spaces(st.g, st.h)
    return LinearMap(V, W, st.J)


def det_df_at(mapping: ChartMap, p) -> float:
    return float(intrinsic_det(differential_at(mapping, p)))


def coordinate_det_df_at(mapping: ChartMap, p) -> float:
    """``sqrt|h∘f| / sqrt|g| * det[df]``."""
    st = point_state(mapping, p)
    return st.sqrt_h / st.sqrt_g * float(np.linalg.det(st.J))


def cof_df_at(mapping: ChartMap, p) -> np.ndarray:
    return gen.values(intrinsic_cof(differential_at(mapping, p)).matrix)


@lru_cache(maxsize=65536)
def _seeded_cof(mapping: ChartMap, key: tuple, i: int) -> tuple:
    """Dual ``(J, g, h, Cof)`` seeded along coordinate direction ``i``."""
    st = _state(mapping, key)
    J, g, h = _seeded(st, np.eye(mapping.dim)[i])
    out = (J, g, h, _cof_matrix(J, g, h))
    for arr in out:
        arr.setflags(write=False)
    return out


@lru_cache(maxsize=16384)
def _cof_jet(mapping: ChartMap, key: tuple):
    d = mapping.dim
    C = None
    dC = np.zeros((d, d, d))
    for i in range(d):
        Cd = _seeded_cof(mapping, key, i)[3]
        if C is None:
            C = gen.values(Cd)
        dC[i] = gen.derivatives(Cd)
    # cached: callers must copy before modifying
    C.setflags(write=False)
    dC.setflags(write=False)
    return C, dC


def cof_jet(mapping: ChartMap, p):
    """``(C, dC)`` with ``dC[i, a, j] = d_i (Cof df)_j^a`` from dual propagation."""
    return _cof_jet(mapping, _key(p))


def coordinate_cof_identity_residual(mapping: ChartMap, p) -> float:
    """Max-norm residual of ``g^ij h_ab C^a_i = sqrt|h|/sqrt|g| cof[df]^T``."""
    st = point_state(mapping, p)
    C = cof_df_at(mapping, p)
    lhs = np.einsum("ij,ab,ai->jb", st.g_inv, st.h, C)
    cof = gen.values(matrix_cofactor(st.J))
    rhs = st.sqrt_h / st.sqrt_g * cof.T
    return float(np.max(np.abs(lhs - rhs)))


def covariant_derivative_cof_at(mapping: ChartMap, p) -> np.ndarray:
    """``N[i, j, a] = (nabla_i Cof df)_j^a`` on ``T*M1 (x) f*TM2``."""
    st = point_state(mapping, p)
    C, dC = cof_jet(mapping, p)
    N = np.einsum("iaj->ija", dC).copy()
    N -= np.einsum("kij,ak->ija", st.gamma_src, C)
    N += np.einsum("abc,bi,cj->ija", st.gamma_tgt, st.J, C)
    return N


def coderivative_cof_at(mapping: ChartMap, p) -> np.ndarray:
    """``(delta Cof df)^a = -g^ij (nabla_i Cof df)_j^a``."""
    st = point_state(mapping, p)
    return -np.einsum("ij,ija->a", st.g_inv, covariant_derivative_cof_at(mapping, p))


def coderivative_cof_frame_at(mapping: ChartMap, p) -> np.ndarray:
    """``-sum_a (nabla_{E_a} Cof df)(E_a)`` in an orthonormal frame field.

    Independent of :func:`coderivative_cof_at`: each term is computed as
    ``nabla_{E_a}(omega(E_a)) - omega(nabla_{E_a} E_a)`` with derivatives
    taken along the frame directions themselves.
    """
    st = point_state(mapping, p)
    d = mapping.dim
    E0 = gen.values(OrientedInnerProductSpace(st.g).frame)
    out = np.zeros(d)
    for a in range(d):
        v = E0[:, a]
        J, g, h = _seeded(st, v)
        C = _cof_matrix(J, g, h)
        E = OrientedInnerProductSpace(g).frame
        s = gen.matvec(C, E[:, a])
        ds = gen.derivatives(s)
        s0 = gen.values(s)
        dE = gen.derivatives(E[:, a])
        nabla_s = ds + np.einsum("abc,b,c->a", st.gamma_tgt, st.J @ v, s0)
        nabla_E = dE + np.einsum("kij,i,j->k", st.gamma_src, v, v)
        out -= nabla_s - gen.values(C) @ nabla_E
    return out


def euclidean_div_cof(mapping: ChartMap, p) -> tuple:
    """Row-wise ``div cof grad f`` of the coordinate map (matrix cofactor).

    Returns ``(residual_vector, scale)`` where ``scale`` is the largest
    individual summand ``|d_j cof[a, j]|``.
    """
    st = point_state(mapping, p)
    d = mapping.dim
    out = np.zeros(d)
    scale = 0.0
    for j in range(d):
        J = _dual_array(st.J, st.hess[:, :, j])
        cof = gen.derivatives(matrix_cofactor(J))
        out += cof[:, j]
        scale = max(scale, float(np.max(np.abs(cof[:, j]))))
    return out, scale


# --------------------------------------------------------------------------
# vector fields, divergence, Piola transform


def _field_dual_at_image(X: VectorFieldOnChart, st: PointState, v) -> np.ndarray:
    """``X∘f`` as duals seeded along source direction ``v``."""
    return _dual_array(X.value(st.fp), X.jacobian(st.fp) @ (st.J @ np.asarray(v, dtype=float)))


def divergence_at(X: VectorFieldOnChart, p) -> float:
    """``(1/sqrt|g|) d_i (sqrt|g| X^i)`` with exact derivatives."""
    chart = X.chart
    d = chart.dim
    Xv = X.value(p)
    dX = X.jacobian(p)
    total = 0.0
    sqrt_g = None
    for i in range(d):
        e = np.eye(d)[i]
        g = chart.metric_dual(p, e)
        rg = dual.sqrt(gen.det(g))
        term = rg * DualScalar(Xv[i], dX[i, i])
        sqrt_g = rg.value
        total += term.derivative
    return total / sqrt_g


def divergence_christoffel_at(X: VectorFieldOnChart, p) -> float:
    """``d_i X^i + Gamma^i_ik X^k``."""
    G = christoffel_at(X.chart, p)
    return float(np.trace(X.jacobian(p)) + np.einsum("iik,k->", G, X.value(p)))


def _piola_generic(C, g, h, Xf):
    V, W = _spaces(g, h)
    T = metric_transpose(LinearMap(V, W, C))
    return gen.matvec(T.matrix, Xf)


def piola_transform_at(mapping: ChartMap, X: VectorFieldOnChart, p) -> np.ndarray:
    """``(Cof df)^T (X∘f)`` in source coordinate components."""
    st = point_state(mapping, p)
    C, _ = cof_jet(mapping, p)
    return gen.values(_piola_generic(gen.as_obj(C), gen.as_obj(st.g), gen.as_obj(st.h), gen.as_obj(X.value(st.fp))))


def piola_transform_via_inverse(mapping: ChartMap, X: VectorFieldOnChart, p) -> np.ndarray:
    """``Det df * (df)^{-1} (X∘f)``; only for invertible differentials."""
    st = point_state(mapping, p)
    return det_df_at(mapping, p) * np.linalg.solve(st.J, X.value(st.fp))


def div_piola_at(mapping: ChartMap, X: VectorFieldOnChart, p) -> float:
    """Divergence on the source chart of ``Piola(X)``, by dual propagation."""
    st = point_state(mapping, p)
    d = mapping.dim
    total = 0.0
    key = _key(p)
    for i in range(d):
        _, g, h, C = _seeded_cof(mapping, key, i)
        P = _piola_generic(C, g, h, _field_dual_at_image(X, st, np.eye(d)[i]))
        total += (dual.sqrt(gen.det(g)) * P[i]).derivative
    return total / st.sqrt_g


def _div_target_at_image(mapping, X, st):
    target_field = VectorFieldOnChart(mapping.target, X.components) if X.chart is not mapping.target else X
    return divergence_at(target_field, st.fp)


def residual_marsden_hughes(mapping: ChartMap, X: VectorFieldOnChart, p, *, normalize: bool = False) -> float:
    """``|div Piola(X) - (div X ∘ f) Det df|``; raises :class:`GuardSkip` when
    ``|Det df| < DIFFEO_GUARD``."""
    st = point_state(mapping, p)
    D = det_df_at(mapping, p)
    if abs(D) < DIFFEO_GUARD:
        raise GuardSkip(f"|Det df| = {abs(D):.3e} below {DIFFEO_GUARD:g} at {list(st.p)}")
    lhs = div_piola_at(mapping, X, p)
    rhs = _div_target_at_image(mapping, X, st) * D
    r = abs(lhs - rhs)
    return r / (1.0 + max(abs(lhs), abs(rhs))) if normalize else r


def residual_generalized(mapping: ChartMap, X: VectorFieldOnChart, p, *, normalize: bool = False) -> float:
    """``|div Piola(X) - (div X ∘ f) Det df + <X∘f, delta Cof df>_h|`` (no invertibility needed)."""
    st = point_state(mapping, p)
    lhs = div_piola_at(mapping, X, p)
    a = _div_target_at_image(mapping, X, st) * det_df_at(mapping, p)
    b = float(X.value(st.fp) @ st.h @ coderivative_cof_at(mapping, p))
    r = abs(lhs - a + b)
    return r / (1.0 + max(abs(lhs), abs(a), abs(b))) if normalize else r


# --------------------------------------------------------------------------
# coordinate forms


def residual_coordinate(mapping: ChartMap, p) -> tuple:
    """Coordinate Piola residuals ``(full, simplified)``.

    ``full_c = -(1/sqrt|h∘f|) d_j(cof[df]^T{}^j_c sqrt|h∘f|) + Gamma^b_bc(f) det[df]``
    ``simplified_c = d_j(cof[df]^T{}^j_c)``

    Analytically ``full + simplified = det[df] (Gamma^b_bc - d_c sqrt|h| / sqrt|h|)``,
    which vanishes by the Christoffel-trace identity.
    """
    st = point_state(mapping, p)
    d = mapping.dim
    full = np.zeros(d)
    simplified = np.zeros(d)
    for j in range(d):
        e = np.eye(d)[j]
        J, _, h = _seeded(st, e)
        cof = matrix_cofactor(J)
        rh = dual.sqrt(gen.det(h))
        for c in range(d):
            full[c] -= (cof[c, j] * rh).derivative / rh.value
            simplified[c] += cof[c, j].derivative
    trace = np.einsum("bbc->c", st.gamma_tgt)
    full += trace * float(np.linalg.det(st.J))
    return full, simplified


def christoffel_trace_residual(chart: Chart, y) -> float:
    """``max_c |Gamma^b_bc - d_c sqrt|h| / sqrt|h||`` at target point ``y``."""
    G = christoffel_at(chart, y)
    d = chart.dim
    out = 0.0
    for c in range(d):
        rh = dual.sqrt(gen.det(chart.metric_dual(y, np.eye(d)[c])))
        out = max(out, abs(float(np.trace(G[:, :, c])) - rh.derivative / rh.value))
    return out


def residual_mh83_published(mapping: ChartMap, p) -> np.ndarray:
    """``d_j(sqrt|h∘f| cof[df]^T{}^j_c)``: the published coordinate form,
    which omits the connection term and is not an identity in general."""
    st = point_state(mapping, p)
    d = mapping.dim
    out = np.zeros(d)
    for j in range(d):
        J, _, h = _seeded(st, np.eye(d)[j])
        cof = matrix_cofactor(J)
        rh = dual.sqrt(gen.det(h))
        for c in range(d):
            out[c] += (rh * cof[c, j]).derivative
    return out


# --------------------------------------------------------------------------
# bundles: derivative of the determinant, Hodge star parallelism


class MetricBundle(Protocol):
    chart: Chart
    rank: int

    def gram_dual(self, p, v) -> np.ndarray: ...

    def connection_at(self, p) -> np.ndarray:
        """``Gam[i, a, b]``: ``nabla_{d_i} e_b = Gam[i, a, b] e_a``."""
        ...


@dataclass(frozen=True, eq=False)
class TangentBundle:
    """Tangent bundle of a chart with its Levi-Civita connection."""

    chart: Chart

    @property
    def rank(self) -> int:
        return self.chart.dim

    def gram_dual(self, p, v):
        return self.chart.metric_dual(p, v)

    def connection_at(self, p):
        return np.einsum("aib->iab", christoffel_at(self.chart, p))


@dataclass(frozen=True, eq=False)
class FrameBundle:
    """Synthetic rank-n bundle over a chart with metric ``gram`` (expressions).

    The connection makes the Cholesky orthonormal frame ``L^{-T}`` parallel and
    adds ``L^{-T} K_i L^T`` for the constant skew matrices ``K_i``; every such
    connection is metric-compatible.
    """

    chart: Chart
    gram: tuple
    skew: tuple = ()

    def __post_init__(self):
        rows = tuple(tuple(ex.parse(s, self.chart.dim) if isinstance(s, str) else s for s in r) for r in self.gram)
        object.__setattr__(self, "gram", rows)

    @property
    def rank(self) -> int:
        return len(self.gram)

    def _fns(self):
        fn = self.__dict__.get("_fn")
        if fn is None:
            flat = [e for r in self.gram for e in r]
            fn = ex.compile_exprs(flat)
            dfn = ex.compile_exprs([ex.diff(e, k) for k in range(self.chart.dim) for e in flat])
            self.__dict__["_fn"] = fn
            self.__dict__["_dfn"] = dfn
        return self.__dict__["_fn"], self.__dict__["_dfn"]

    def gram_dual(self, p, v):
        n, m = self.rank, self.chart.dim
        fn, dfn = self._fns()
        x = [float(t) for t in p]
        G = np.array(fn(x)).reshape(n, n)
        dG = np.array(dfn(x)).reshape(m, n, n)
        return _dual_array(G, np.tensordot(np.asarray(v, dtype=float), dG, axes=1))

    def connection_at(self, p):
        n, m = self.rank, self.chart.dim
        K = np.zeros((m, n, n))
        if len(self.skew):
            S = np.asarray(self.skew, dtype=float).reshape(m, n, n)
            K = S - S.transpose(0, 2, 1)
        out = np.zeros((m, n, n))
        for i in range(m):
            G = self.gram_dual(p, np.eye(m)[i])
            L = gen.cholesky(G)
            Lt = L.T.copy()
            LinvT = gen.values(gen.lower_inverse(L)).T
            out[i] = LinvT @ (gen.derivatives(Lt) + K[i] @ gen.values(Lt))
        return out


class BundleMapField(Protocol):
    source: MetricBundle
    target: MetricBundle

    def jet(self, p, v) -> tuple: ...

    def connections(self, p) -> tuple: ...


@dataclass(frozen=True, eq=False)
class DifferentialField:
    """``df`` as a bundle map ``TM1 -> f*TM2`` with pulled-back Levi-Civita connections."""

    mapping: ChartMap

    def jet(self, p, v):
        st = point_state(self.mapping, p)
        return _seeded(st, v)

    def connections(self, p):
        st = point_state(self.mapping, p)
        gam_e = np.einsum("aib->iab", st.gamma_src)
        gam_f = np.einsum("abc,bi->iac", st.gamma_tgt, st.J)
        return gam_e, gam_f


@dataclass(frozen=True, eq=False)
class SyntheticBundleMap:
    """Bundle map ``E -> F`` given by a matrix of expressions over the base chart."""

    source: FrameBundle
    target: FrameBundle
    matrix: tuple

    def __post_init__(self):
        dim = self.source.chart.dim
        rows = tuple(tuple(ex.parse(s, dim) if isinstance(s, str) else s for s in r) for r in self.matrix)
        object.__setattr__(self, "matrix", rows)
        flat = [e for r in rows for e in r]
        object.__setattr__(self, "_fn", ex.compile_exprs(flat))
        object.__setattr__(self, "_dfn", ex.compile_exprs([ex.diff(e, k) for k in range(dim) for e in flat]))

    def jet(self, p, v):
        n, m = self.source.rank, self.source.chart.dim
        x = [float(t) for t in p]
        A = np.array(self._fn(x)).reshape(n, n)
        dA = np.array(self._dfn(x)).reshape(m, n, n)
        A = _dual_array(A, np.tensordot(np.asarray(v, dtype=float), dA, axes=1))
        return A, self.source.gram_dual(p, v), self.target.gram_dual(p, v)

    def connections(self, p):
        return self.source.connection_at(p), self.target.connection_at(p)


def check_cof_is_derivative_of_det(field, p, direction) -> float:
    """``|d(Det A)(X) - <Cof A, nabla_X A>_{E,F}|`` at ``p`` for ``X = direction``."""
    X = np.asarray(direction, dtype=float)
    A, GE, GF = field.jet(p, X)
    V, W = _spaces(GE, GF)
    lhs = intrinsic_det(LinearMap(V, W, A)).derivative
    A0, GE0, GF0 = gen.values(A), gen.values(GE), gen.values(GF)
    dA = gen.derivatives(A)
    gam_e, gam_f = field.connections(p)
    ge, gf = np.tensordot(X, gam_e, axes=1), np.tensordot(X, gam_f, axes=1)
    nabla = dA + gf @ A0 - A0 @ ge
    C = gen.values(_cof_matrix(gen.as_obj(A0), gen.as_obj(GE0), gen.as_obj(GF0)))
    rhs = float(np.einsum("ij,ab,ai,bj->", np.linalg.inv(GE0), GF0, C, nabla))
    return abs(lhs - rhs)


def det_directional_fd(field, p, direction, step: float) -> float:
    """Central difference ``(Det A(p + hX) - Det A(p - hX)) / 2h``."""
    X = np.asarray(direction, dtype=float)
    p = np.asarray(p, dtype=float)

    def det_at(q):
        A, GE, GF = field.jet(q, np.zeros_like(X))
        V, W = _spaces(gen.values(GE), gen.values(GF))
        return float(intrinsic_det(LinearMap(V, W, gen.values(A))))

    return (det_at(p + step * X) - det_at(p - step * X)) / (2.0 * step)


def check_hodge_parallel(bundle, p, direction, beta: Sequence, k: int, connection=None) -> float:
    """``max |star(nabla_X beta) - nabla_X(star beta)|`` for a k-vector field.

    ``beta`` holds the ``C(n, k)`` coefficient expressions of the field over
    the bundle's base chart.  ``connection`` overrides the bundle connection
    (shape ``(m, n, n)``), e.g. to run a metric-incompatible control.
    """
    X = np.asarray(direction, dtype=float)
    n = bundle.rank
    G = bundle.gram_dual(p, X)
    exprs = [ex.parse(b, bundle.chart.dim) if isinstance(b, str) else b for b in beta]
    b = np.array([ex.eval_dual(e, p, X) for e in exprs], dtype=object)
    H = hodge_matrix(OrientedInnerProductSpace(G), k)
    star_b = gen.matvec(H, b)
    gam = bundle.connection_at(p) if connection is None else np.asarray(connection, dtype=float)
    gX = np.tensordot(X, gam, axes=1)
    b0 = gen.values(b)
    nabla_b = gen.derivatives(b) + derivation_matrix(gX, k) @ b0
    lhs = gen.values(H) @ nabla_b
    rhs = gen.derivatives(star_b) + derivation_matrix(gX, n - k) @ gen.values(star_b)
    return float(np.max(np.abs(lhs - rhs)))
