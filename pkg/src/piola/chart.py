"""Riemannian geometry on a single coordinate box.

A :class:`Chart` is an axis-aligned box carrying a metric whose entries are
:mod:`piola.expr` expressions, so every metric derivative is exact.  The
module also provides maps between charts, vector fields, a smooth bump
for localizing test fields, Halton sample points and tensor-product
Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from piola import _generic as gen
from piola import expr as ex
from piola.dual import DualScalar

__all__ = [
    "Chart", "ChartMap", "VectorFieldOnChart", "QuadratureRule", "GeometryError",
    "metric_at", "inverse_metric_at", "christoffel_at", "volume_density_at",
    "orthonormal_frame_at", "integrate", "gauss_legendre", "sample_points",
    "bump", "bump_gradient", "bump_dual",
]


class GeometryError(ValueError):
    pass


def _as_exprs(items, dim) -> tuple:
    return tuple(ex.parse(s, dim) if isinstance(s, str) else s for s in items)


@dataclass(frozen=True, eq=False)
class Chart:
    """Coordinate box ``[lo_i, hi_i]`` with a metric of expressions ``g_ij(x)``."""

    dim: int
    lower: tuple
    upper: tuple
    metric: tuple  # dim x dim nested tuples of Expr

    def __post_init__(self):
        d = self.dim
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != d or len(hi) != d or any(a >= b for a, b in zip(lo, hi)):
            raise GeometryError("box bounds must satisfy lower < upper in every axis")
        rows = tuple(_as_exprs(r, d) for r in self.metric)
        if len(rows) != d or any(len(r) != d for r in rows):
            raise GeometryError(f"metric must be {d}x{d}")
        for r in rows:
            for e in r:
                if ex.max_var_index(e) >= d:
                    raise GeometryError(f"metric entry {ex.unparse(e)!r} uses a variable beyond dim {d}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "metric", rows)

    @classmethod
    def from_strings(cls, dim, box, metric) -> "Chart":
        lo = [b[0] for b in box]
        hi = [b[1] for b in box]
        return cls(dim, tuple(lo), tuple(hi), tuple(tuple(r) for r in metric))

    @classmethod
    def euclidean(cls, dim, box) -> "Chart":
        m = [["1" if i == j else "0" for j in range(dim)] for i in range(dim)]
        return cls.from_strings(dim, box, m)

    @property
    def box(self) -> list:
        return [[a, b] for a, b in zip(self.lower, self.upper)]

    @cached_property
    def _flat_metric(self):
        return [e for r in self.metric for e in r]

    @cached_property
    def _metric_fn(self):
        return ex.compile_exprs(self._flat_metric)

    @cached_property
    def _dmetric_fn(self):
        # index order: k (derivative), i, j
        return ex.compile_exprs([ex.diff(e, k) for k in range(self.dim) for e in self._flat_metric])

    @cached_property
    def is_constant_metric(self) -> bool:
        return all(isinstance(e, ex.Const) for e in self._flat_metric)

    def contains(self, p, slack: float = 0.0) -> bool:
        return all(a - slack <= v <= b + slack for v, a, b in zip(p, self.lower, self.upper))

    def metric_values(self, p) -> np.ndarray:
        return np.array(self._metric_fn([float(v) for v in p]), dtype=float).reshape(self.dim, self.dim)

    def metric_derivatives(self, p) -> np.ndarray:
        """``dg[k, i, j] = d_k g_ij`` at ``p``."""
        d = self.dim
        return np.array(self._dmetric_fn([float(v) for v in p]), dtype=float).reshape(d, d, d)

    def metric_dual(self, p, direction) -> np.ndarray:
        """Metric as dual numbers seeded with its exact derivative along ``direction``."""
        g = self.metric_values(p)
        dg = np.tensordot(np.asarray(direction, dtype=float), self.metric_derivatives(p), axes=1)
        return _dual_array(g, dg)


def _dual_array(values, derivs) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    derivs = np.asarray(derivs, dtype=float)
    out = np.empty(values.shape, dtype=object)
    for idx in np.ndindex(values.shape):
        out[idx] = DualScalar(values[idx], derivs[idx])
    return out


@dataclass(frozen=True, eq=False)
class VectorFieldOnChart:
    """Components of a field as expressions over ``chart`` coordinates."""

    chart: Chart
    components: tuple

    def __post_init__(self):
        comps = _as_exprs(self.components, self.chart.dim)
        object.__setattr__(self, "components", comps)
        for e in comps:
            if ex.max_var_index(e) >= self.chart.dim:
                raise GeometryError("field component uses a variable beyond the chart dimension")

    @cached_property
    def _fn(self):
        return ex.compile_exprs(self.components)

    @cached_property
    def _jac_fn(self):
        return ex.compile_exprs([ex.diff(e, j) for e in self.components for j in range(self.chart.dim)])

    def value(self, p) -> np.ndarray:
        return np.array(self._fn([float(v) for v in p]), dtype=float)

    def jacobian(self, p) -> np.ndarray:
        """``J[a, j] = d_j X^a``."""
        n = len(self.components)
        return np.array(self._jac_fn([float(v) for v in p]), dtype=float).reshape(n, self.chart.dim)


@dataclass(frozen=True, eq=False)
class ChartMap:
    """Smooth map between two charts of equal dimension, ``y^a = f^a(x)``."""

    source: Chart
    target: Chart
    components: tuple

    def __post_init__(self):
        if self.source.dim != self.target.dim:
            raise GeometryError("source and target charts must have equal dimension")
        comps = _as_exprs(self.components, self.source.dim)
        if len(comps) != self.target.dim:
            raise GeometryError(f"map needs {self.target.dim} components, got {len(comps)}")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.source.dim

    @cached_property
    def _fn(self):
        return ex.compile_exprs(self.components)

    @cached_property
    def jacobian_exprs(self):
        d = self.dim
        return [[ex.diff(self.components[a], j) for j in range(d)] for a in range(d)]

    @cached_property
    def _jac_fn(self):
        return ex.compile_exprs([e for r in self.jacobian_exprs for e in r])

    @cached_property
    def _hess_fn(self):
        # index order: a, j, i  ->  d_i d_j f^a
        d = self.dim
        return ex.compile_exprs(
            [ex.diff(self.jacobian_exprs[a][j], i) for a in range(d) for j in range(d) for i in range(d)]
        )

    def value(self, p) -> np.ndarray:
        return np.array(self._fn([float(v) for v in p]), dtype=float)

    def jacobian(self, p) -> np.ndarray:
        """``J[a, j] = d_j f^a``."""
        d = self.dim
        return np.array(self._jac_fn([float(v) for v in p]), dtype=float).reshape(d, d)

    def hessian(self, p) -> np.ndarray:
        """``H[a, j, i] = d_i d_j f^a``."""
        d = self.dim
        return np.array(self._hess_fn([float(v) for v in p]), dtype=float).reshape(d, d, d)


# --------------------------------------------------------------------------
# pointwise geometry


def metric_at(chart: Chart, p) -> np.ndarray:
    g = chart.metric_values(p)
    if np.max(np.abs(g - g.T)) > 1e-12 * max(1.0, np.max(np.abs(g))):
        raise GeometryError(f"metric not symmetric at {list(p)}")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise GeometryError(f"metric not positive definite at {list(p)}") from None
    return g


def inverse_metric_at(chart: Chart, p) -> np.ndarray:
    return np.linalg.inv(metric_at(chart, p))


def christoffel_at(chart: Chart, p) -> np.ndarray:
    """Levi-Civita symbols ``Gamma[k, i, j]`` (upper index first).

    ``Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)``.
    """
    ginv = inverse_metric_at(chart, p)
    dg = chart.metric_derivatives(p)  # dg[l, i, j] = d_l g_ij
    # first kind: [ij, l] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    first = 0.5 * (dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0))
    gamma = np.einsum("kl,ijl->kij", ginv, first)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def volume_density_at(chart: Chart, p) -> float:
    return float(math.sqrt(np.linalg.det(metric_at(chart, p))))


def orthonormal_frame_at(chart: Chart, p) -> np.ndarray:
    """Gram-Schmidt on the coordinate basis; columns are ``E_a`` in coordinates."""
    g = metric_at(chart, p)
    d = chart.dim
    E = np.zeros((d, d))
    for a in range(d):
        v = np.zeros(d)
        v[a] = 1.0
        for b in range(a):
            v = v - (E[:, b] @ g @ v) * E[:, b]
        E[:, a] = v / math.sqrt(v @ g @ v)
    return E


# --------------------------------------------------------------------------
# bump

def _bump1(t: float) -> float:
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return math.exp(-1.0 / (t * (1.0 - t)))


def _dbump1(t: float) -> float:
    if t <= 0.0 or t >= 1.0:
        return 0.0
    s = t * (1.0 - t)
    return math.exp(-1.0 / s) * (1.0 - 2.0 * t) / (s * s)


def bump(chart: Chart, p) -> float:
    """``prod_i b((x_i - lo_i) / (hi_i - lo_i))`` with ``b(t) = exp(-1/(t(1-t)))``."""
    out = 1.0
    for v, a, b in zip(p, chart.lower, chart.upper):
        out *= _bump1((v - a) / (b - a))
    return out


def bump_gradient(chart: Chart, p) -> np.ndarray:
    ts = [(v - a) / (b - a) for v, a, b in zip(p, chart.lower, chart.upper)]
    vals = [_bump1(t) for t in ts]
    grad = np.zeros(chart.dim)
    for i, (t, a, b) in enumerate(zip(ts, chart.lower, chart.upper)):
        others = math.prod(vals[:i] + vals[i + 1:])
        grad[i] = _dbump1(t) / (b - a) * others
    return grad


def bump_dual(chart: Chart, p, direction) -> DualScalar:
    return DualScalar(bump(chart, p), float(bump_gradient(chart, p) @ np.asarray(direction, dtype=float)))


# --------------------------------------------------------------------------
# sampling and quadrature


def sample_points(chart: Chart, count: int, seed: int, shrink: float = 0.05) -> np.ndarray:
    """Scrambled Halton points in the box shrunk by ``shrink`` of each side."""
    h = qmc.Halton(d=chart.dim, scramble=True, seed=seed)
    u = h.random(count)
    lo = np.array(chart.lower)
    hi = np.array(chart.upper)
    margin = shrink * (hi - lo)
    return qmc.scale(u, lo + margin, hi - margin) if count else np.zeros((0, chart.dim))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    order: int
    nodes: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)


def gauss_legendre(chart: Chart, order: int) -> QuadratureRule:
    """Tensor-product Gauss-Legendre rule with ``order`` points per axis."""
    if order < 1:
        raise ValueError("order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    axes_nodes = []
    axes_weights = []
    for a, b in zip(chart.lower, chart.upper):
        axes_nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        axes_weights.append(0.5 * (b - a) * w)
    grids = np.meshgrid(*axes_nodes, indexing="ij")
    wgrids = np.meshgrid(*axes_weights, indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    weights = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
    return QuadratureRule(order, nodes, weights)


def integrate(chart: Chart, rule: QuadratureRule, field: Callable[[np.ndarray], float]) -> float:
    """``sum_q w_q field(p_q) sqrt|g|(p_q)``, reduced by pairwise summation."""
    vals = np.empty(len(rule.weights))
    for q, p in enumerate(rule.nodes):
        vals[q] = rule.weights[q] * float(field(p)) * volume_density_at(chart, p)
    return float(np.sum(vals))
