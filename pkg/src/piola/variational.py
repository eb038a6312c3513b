"""The volume functional and its variations.

``E(f) = int Det df dVol_1`` is a null-Lagrangian: it is unchanged by any
variation that keeps the boundary fixed.  This module evaluates it by
quadrature, builds bump-localized variations ``f_t = f + t b V`` in target
coordinates, and computes the first variation both from the pairing with
``Cof df`` and by central differences of ``E``.

Fields ``V`` and ``xi`` are sections of the pulled-back bundle: their
components are target-basis components written as expressions in source
coordinates, so they are carried as :class:`VectorFieldOnChart` on the
source chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from piola.chart import (
    Chart, ChartMap, QuadratureRule, VectorFieldOnChart, bump, bump_gradient,
    integrate, metric_at, sample_points, volume_density_at,
)
from piola.core import coderivative_cof_at, cof_df_at, point_state
from piola.exterior import LinearMap, OrientedInnerProductSpace, intrinsic_det

__all__ = [
    "VariationError", "VariedMap", "Variation", "energy", "first_variation",
    "first_variation_fd", "varied_energies", "energy_sweep", "pairing_density", "weak_form_residual",
    "weak_form_integral", "coderivative_pairing", "adjointness_gap",
    "boundary_dependence_check",
]


class VariationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VariedMap:
    """``f_t = f + t * b * V`` with ``b`` the source-box bump."""

    base: ChartMap
    field: VectorFieldOnChart
    t: float

    @property
    def source(self) -> Chart:
        return self.base.source

    @property
    def target(self) -> Chart:
        return self.base.target

    @property
    def dim(self) -> int:
        return self.base.dim

    def value(self, p) -> np.ndarray:
        return self.base.value(p) + self.t * bump(self.source, p) * self.field.value(p)

    def jacobian(self, p) -> np.ndarray:
        b = bump(self.source, p)
        db = bump_gradient(self.source, p)
        V = self.field.value(p)
        dV = self.field.jacobian(p)
        return self.base.jacobian(p) + self.t * (np.outer(V, db) + b * dV)


def _det_df(mapping, p) -> float:
    g = metric_at(mapping.source, p)
    h = metric_at(mapping.target, mapping.value(p))
    A = LinearMap(OrientedInnerProductSpace(g), OrientedInnerProductSpace(h), mapping.jacobian(p))
    return float(intrinsic_det(A))


def energy(mapping, rule: QuadratureRule) -> float:
    """Quadrature of ``Det df`` against the source volume form."""
    return integrate(mapping.source, rule, lambda p: _det_df(mapping, p))


def varied_energies(var: "Variation", rule: QuadratureRule, ts) -> np.ndarray:
    """``E(f_t)`` for each ``t``; node data not depending on ``t`` is computed once."""
    src, tgt = var.base.source, var.base.target
    nodes = []
    for p in rule.nodes:
        g = metric_at(src, p)
        b = bump(src, p)
        V = var.field.value(p)
        dV = np.outer(V, bump_gradient(src, p)) + b * var.field.jacobian(p)
        nodes.append((OrientedInnerProductSpace(g), var.base.value(p), b * V, var.base.jacobian(p), dV))
    sqrt_g = np.array([volume_density_at(src, p) for p in rule.nodes])
    out = []
    for t in ts:
        vals = np.empty(len(nodes))
        for q, (V_space, y, bV, J, dV) in enumerate(nodes):
            W = OrientedInnerProductSpace(metric_at(tgt, y + t * bV))
            vals[q] = float(intrinsic_det(LinearMap(V_space, W, J + t * dV))) * sqrt_g[q]
        out.append(float(np.sum(rule.weights * vals)))
    return np.array(out)


@dataclass(frozen=True, eq=False)
class Variation:
    base: ChartMap
    field: VectorFieldOnChart
    t_max: float | None = None
    check_points: int = 256
    seed: int = 0
    _t_max: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        if self.field.chart.dim != self.base.dim or len(self.field.components) != self.base.dim:
            raise VariationError("variation field must have one component per target coordinate")
        tgt = self.base.target
        t_max = self.t_max
        if t_max is None:
            t_max = 0.1 * min(b - a for a, b in zip(tgt.lower, tgt.upper))
        object.__setattr__(self, "_t_max", float(t_max))
        pts = sample_points(self.base.source, self.check_points, self.seed, shrink=0.0)
        for p in pts:
            for t in (-self._t_max, self._t_max):
                y = self.at(t).value(p)
                if not tgt.contains(y):
                    raise VariationError(f"varied map leaves the target box at x={list(p)}, t={t:g}: f_t = {list(y)}")

    @property
    def span(self) -> float:
        return self._t_max

    def at(self, t: float) -> VariedMap:
        return VariedMap(self.base, self.field, float(t))


def pairing_density(mapping: ChartMap, xi: VectorFieldOnChart, p, *, localize: bool = True) -> float:
    """``g^ij h_ab (Cof df)_i^a (nabla_j eta)^b`` with ``eta = b xi`` (or ``xi``)."""
    st = point_state(mapping, p)
    C = cof_df_at(mapping, p)
    v = xi.value(p)
    dv = xi.jacobian(p)
    if localize:
        b = bump(mapping.source, p)
        db = bump_gradient(mapping.source, p)
        dv = np.outer(v, db) + b * dv
        v = b * v
    # (nabla_j eta)^a = d_j eta^a + Gamma^a_bc(f) d_j f^b eta^c
    nabla = dv + np.einsum("abc,bj,c->aj", st.gamma_tgt, st.J, v)
    return float(np.einsum("ij,ab,ai,bj->", st.g_inv, st.h, C, nabla))


@dataclass(frozen=True, eq=False)
class _Nodes:
    """Per-node data of a map that every pairing against it reuses."""

    points: np.ndarray
    wvol: np.ndarray  # weight * sqrt|g|
    bump: np.ndarray
    dbump: np.ndarray
    g_inv: np.ndarray
    h: np.ndarray
    cof: np.ndarray
    conn: np.ndarray  # conn[q, a, j, c] = Gamma^a_bc(f) d_j f^b
    delta: np.ndarray


@lru_cache(maxsize=8)
def _nodes(mapping: ChartMap, rule: QuadratureRule) -> _Nodes:
    pts = rule.nodes
    sts = [point_state(mapping, p) for p in pts]
    return _Nodes(
        points=pts,
        wvol=rule.weights * np.array([volume_density_at(mapping.source, p) for p in pts]),
        bump=np.array([bump(mapping.source, p) for p in pts]),
        dbump=np.array([bump_gradient(mapping.source, p) for p in pts]),
        g_inv=np.array([st.g_inv for st in sts]),
        h=np.array([st.h for st in sts]),
        cof=np.array([cof_df_at(mapping, p) for p in pts]),
        conn=np.array([np.einsum("abc,bj->ajc", st.gamma_tgt, st.J) for st in sts]),
        delta=np.array([coderivative_cof_at(mapping, p) for p in pts]),
    )


def _localized(nodes: _Nodes, xi: VectorFieldOnChart) -> tuple:
    v = np.array([xi.value(p) for p in nodes.points])
    dv = np.array([xi.jacobian(p) for p in nodes.points])
    eta = nodes.bump[:, None] * v
    deta = np.einsum("qa,qj->qaj", v, nodes.dbump) + nodes.bump[:, None, None] * dv
    return eta, deta


def _pairing_integral(mapping: ChartMap, xi: VectorFieldOnChart, rule: QuadratureRule) -> float:
    n = _nodes(mapping, rule)
    eta, deta = _localized(n, xi)
    nabla = deta + np.einsum("qajc,qc->qaj", n.conn, eta)
    dens = np.einsum("qij,qab,qai,qbj->q", n.g_inv, n.h, n.cof, nabla)
    return float(np.sum(n.wvol * dens))


def first_variation(var: Variation, rule: QuadratureRule) -> float:
    """``int <Cof df, nabla(b V)> dVol_1``."""
    return _pairing_integral(var.base, var.field, rule)


def first_variation_fd(var: Variation, rule: QuadratureRule, h: float) -> float:
    if abs(h) > var.span:
        raise VariationError(f"step {h:g} exceeds the admissible range {var.span:g}")
    e_plus, e_minus = varied_energies(var, rule, [h, -h])
    return (e_plus - e_minus) / (2.0 * h)


def energy_sweep(var: Variation, rule: QuadratureRule, count: int = 9) -> tuple:
    """``(ts, E(f_t) - E(f))`` on ``count`` equispaced ``t`` in ``[-t_max, t_max]``."""
    ts = np.linspace(-var.span, var.span, count)
    es = varied_energies(var, rule, np.concatenate([[0.0], ts]))
    return ts, es[1:] - es[0]


def weak_form_integral(mapping: ChartMap, xi: VectorFieldOnChart, rule: QuadratureRule) -> float:
    """``int <Cof df, nabla(b xi)> dVol_1``."""
    return _pairing_integral(mapping, xi, rule)


def weak_form_residual(mapping: ChartMap, xi: VectorFieldOnChart, rule: QuadratureRule) -> float:
    """``|int <Cof df, nabla(b xi)> dVol_1|``; zero when ``Cof df`` is divergence free."""
    return abs(weak_form_integral(mapping, xi, rule))


def coderivative_pairing(mapping: ChartMap, xi: VectorFieldOnChart, rule: QuadratureRule) -> float:
    """``int <b xi, delta Cof df>_h dVol_1``."""
    n = _nodes(mapping, rule)
    eta, _ = _localized(n, xi)
    return float(np.sum(n.wvol * np.einsum("qa,qab,qb->q", eta, n.h, n.delta)))


def adjointness_gap(mapping: ChartMap, xi: VectorFieldOnChart, rule: QuadratureRule) -> float:
    """``|int <Cof df, nabla eta> - int <eta, delta Cof df>|`` for ``eta = b xi``."""
    return abs(weak_form_integral(mapping, xi, rule) - coderivative_pairing(mapping, xi, rule))


def boundary_dependence_check(f: ChartMap, g, rule: QuadratureRule) -> float:
    """``|E(f) - E(g)|`` for maps that agree on the boundary of the source box."""
    if not f.target.is_constant_metric:
        raise VariationError("boundary dependence is checked against a flat target metric only")
    return abs(energy(f, rule) - energy(g, rule))
