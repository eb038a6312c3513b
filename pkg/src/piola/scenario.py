"""Scenario files, the verification pipeline, and reports.

A scenario is a JSON document describing two charts, a map between them
and the list of identities to verify.  :func:`run` evaluates each check at
Halton sample points or by quadrature and collects a :class:`Report`;
:func:`render` prints it as a table or as key-sorted JSON.
"""

from __future__ import annotations

import json
import math
from math import comb
import platform
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from piola import core
from piola import expr as ex
from piola.chart import (
    Chart, ChartMap, GeometryError, VectorFieldOnChart, gauss_legendre, sample_points,
)
from piola.core import GuardSkip, ResidualReport
from piola.variational import (
    Variation, VariationError, VariedMap, adjointness_gap, boundary_dependence_check,
    first_variation, varied_energies, weak_form_integral,
)

SCHEMA_VERSION = 1

CHECKS = {
    "euclidean-piola": "row-wise div cof grad f of the coordinate map vanishes",
    "riemannian-piola": "coderivative of Cof df vanishes (index and frame formulas)",
    "marsden-hughes": "div Piola(X) = (div X o f) Det df where Det df is bounded away from 0",
    "generalized": "div Piola(X) = (div X o f) Det df - <X o f, delta Cof df> for any smooth map",
    "coordinate": "coordinate forms with and without the metric, and the Christoffel-trace identity",
    "mh83-negative": "the coordinate form without the connection term fails at the probe point",
    "cof-derivative": "d(Det df)(X) = <Cof df, nabla_X df>",
    "hodge-parallel": "the Hodge star commutes with the Levi-Civita connection",
    "null-lagrangian": "the volume functional is stationary and constant along boundary-fixed variations",
    "weak-form": "int <Cof df, nabla xi> = 0 for bump-localized xi, and the adjoint pairing agrees",
    "boundary-dependence": "the volume functional depends only on boundary values (flat target)",
}
DEFAULT_CHECKS = [c for c in CHECKS if c != "mh83-negative"]

DEFAULT_TOLERANCES = {
    "pointwise": 1e-8,
    "integral": 1e-6,
    "fd": 1e-5,
    "adjoint": 1e-8,
    "boundary": 1e-7,
}

VALIDATION_POINTS = 1000
MAX_CONDITION = 1e6


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be loaded or fails validation."""


@dataclass
class Scenario:
    name: str
    source: Chart
    target: Chart
    mapping: ChartMap
    checks: list
    fields: dict = field(default_factory=dict)  # "X" | "xi" | "V" -> list of component strings
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    count: int = 200
    seed: int = 0
    quad_order: int = 24
    variation_order: int = 16
    fd_step: float = 1e-3
    probe: list | None = None
    mh83_floor: float = 0.1
    mh83_expected: list | None = None

    @property
    def dim(self) -> int:
        return self.source.dim


@dataclass
class CheckResult:
    name: str
    status: str
    max_residual: float
    mean_residual: float
    tolerance: float
    points: int
    skipped: int = 0
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "tolerance": self.tolerance,
            "points": self.points,
            "skipped": self.skipped,
            "detail": self.detail,
        }


@dataclass
class Report:
    scenario: str
    seed: int
    checks: list
    environment: dict

    @property
    def verdict(self) -> str:
        active = [c for c in self.checks if c.status != "skip"]
        return "pass" if all(c.status == "pass" for c in active) else "fail"

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "scenario": self.scenario,
            "seed": self.seed,
            "checks": [c.as_dict() for c in self.checks],
            "verdict": self.verdict,
            "environment": self.environment,
        }


# --------------------------------------------------------------------------
# loading


def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path or '<root>'}: expected an object")
    if key not in obj:
        raise ScenarioError(f"{path + '.' if path else ''}{key}: missing required field")
    return obj[key]


def _expr_list(items, dim: int, path: str) -> list:
    if not isinstance(items, list):
        raise ScenarioError(f"{path}: expected a list of expressions")
    out = []
    for n, s in enumerate(items):
        if isinstance(s, (int, float)) and not isinstance(s, bool):
            s = repr(float(s))
        if not isinstance(s, str):
            raise ScenarioError(f"{path}[{n}]: expected an expression string")
        try:
            ex.parse(s, dim)
        except ex.ExprError as exc:
            raise ScenarioError(f"{path}[{n}]: {exc}") from None
        out.append(s)
    return out


def _chart(node, path: str) -> Chart:
    dim = _require(node, "dim", path)
    if not isinstance(dim, int) or isinstance(dim, bool) or not 1 <= dim <= 8:
        raise ScenarioError(f"{path}.dim: expected an integer in 1..8")
    box = _require(node, "box", path)
    if not isinstance(box, list) or len(box) != dim:
        raise ScenarioError(f"{path}.box: expected {dim} [lower, upper] pairs")
    for n, side in enumerate(box):
        ok = isinstance(side, list) and len(side) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in side)
        if not ok or not side[0] < side[1]:
            raise ScenarioError(f"{path}.box[{n}]: expected [lower, upper] with lower < upper")
    metric = node.get("metric", "euclidean")
    if metric == "euclidean":
        metric = [["1" if i == j else "0" for j in range(dim)] for i in range(dim)]
    if not isinstance(metric, list) or len(metric) != dim:
        raise ScenarioError(f"{path}.metric: expected a {dim}x{dim} matrix of expressions")
    rows = [_expr_list(r, dim, f"{path}.metric[{i}]") for i, r in enumerate(metric)]
    if any(len(r) != dim for r in rows):
        raise ScenarioError(f"{path}.metric: expected a {dim}x{dim} matrix of expressions")
    return Chart.from_strings(dim, box, rows)


def _validate_chart(chart: Chart, points, path: str) -> None:
    for p in points:
        where = "(" + ", ".join(f"{v:.6g}" for v in p) + ")"
        try:
            g = chart.metric_values(p)
        except ex.ExprError as exc:
            raise ScenarioError(f"{path}.metric: evaluation failed at sampled point {where}: {exc}") from None
        if not np.all(np.isfinite(g)):
            raise ScenarioError(f"{path}.metric: non-finite value at sampled point {where}")
        if np.max(np.abs(g - g.T)) > 1e-12 * max(1.0, float(np.max(np.abs(g)))):
            raise ScenarioError(f"{path}.metric: metric not symmetric at sampled point {where}")
        w = np.linalg.eigvalsh(g)
        if w[0] <= 1e-10:
            raise ScenarioError(f"{path}.metric: metric not positive definite at sampled point {where}")
        if w[-1] / w[0] > MAX_CONDITION:
            raise ScenarioError(f"{path}.metric: condition number {w[-1] / w[0]:.3g} exceeds "
                                f"{MAX_CONDITION:g} at sampled point {where}")


def _validate_field(components, chart: Chart, points, path: str) -> None:
    fn = VectorFieldOnChart(chart, components)
    for p in points:
        try:
            v = fn.value(p)
        except ex.ExprError as exc:
            raise ScenarioError(f"{path}: evaluation failed at sampled point {list(p)}: {exc}") from None
        if not np.all(np.isfinite(v)):
            raise ScenarioError(f"{path}: non-finite value at sampled point {list(p)}")


def scenario_from_dict(data: dict, origin: str = "<scenario>") -> Scenario:
    schema = _require(data, "schema", "")
    if schema != SCHEMA_VERSION:
        raise ScenarioError(f"schema: unsupported version {schema!r} (expected {SCHEMA_VERSION})")
    name = _require(data, "name", "")
    if not isinstance(name, str) or not name:
        raise ScenarioError("name: expected a non-empty string")
    source = _chart(_require(data, "source", ""), "source")
    target = _chart(_require(data, "target", ""), "target")
    if source.dim != target.dim:
        raise ScenarioError("target.dim: must equal source.dim")
    d = source.dim
    comps = _expr_list(_require(data, "map", ""), d, "map")
    if len(comps) != d:
        raise ScenarioError(f"map: expected {d} components, got {len(comps)}")
    mapping = ChartMap(source, target, comps)

    fields = {}
    for key in ("X", "xi", "V"):
        if key in data.get("fields", {}):
            fields[key] = _expr_list(data["fields"][key], d, f"fields.{key}")
            if len(fields[key]) != d:
                raise ScenarioError(f"fields.{key}: expected {d} components")

    checks = data.get("checks", DEFAULT_CHECKS)
    if not isinstance(checks, list):
        raise ScenarioError("checks: expected a list of check names")
    for n, c in enumerate(checks):
        if c not in CHECKS:
            raise ScenarioError(f"checks[{n}]: unknown check {c!r}")

    tol = dict(DEFAULT_TOLERANCES)
    for k, v in data.get("tolerances", {}).items():
        if k not in tol:
            raise ScenarioError(f"tolerances.{k}: unknown tolerance")
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ScenarioError(f"tolerances.{k}: expected a positive number")
        tol[k] = float(v)

    sampling = data.get("sampling", {})
    quad = data.get("quadrature", {})
    sc = Scenario(
        name=name, source=source, target=target, mapping=mapping, checks=list(checks),
        fields=fields, tolerances=tol,
        count=_int(sampling, "count", 200, "sampling"),
        seed=_int(sampling, "seed", 0, "sampling", lo=0),
        quad_order=_int(quad, "order", 24, "quadrature"),
        variation_order=_int(quad, "variation_order", 16, "quadrature", lo=5),
        fd_step=float(data.get("fd_step", 1e-3)),
        probe=data.get("probe"),
        mh83_floor=float(data.get("mh83_floor", 0.1)),
        mh83_expected=data.get("mh83_expected"),
    )
    if sc.probe is not None:
        if not isinstance(sc.probe, list) or len(sc.probe) != d or not source.contains(sc.probe):
            raise ScenarioError(f"probe: expected a point of the source box with {d} coordinates")

    # sampled validation of every expression on its domain
    src_pts = sample_points(source, VALIDATION_POINTS, 0, shrink=0.0)
    tgt_pts = sample_points(target, VALIDATION_POINTS, 0, shrink=0.0)
    _validate_chart(source, src_pts, "source")
    _validate_chart(target, tgt_pts, "target")
    _validate_field(comps, source, src_pts, "map")
    for p in src_pts:
        y = mapping.value(p)
        if not target.contains(y):
            raise ScenarioError(f"map: image {list(y)} of sampled point {list(p)} leaves the target box")
    _validate_chart(target, [mapping.value(p) for p in src_pts], "target")
    if "X" in fields:
        _validate_field(fields["X"], target, tgt_pts, "fields.X")
    for key in ("xi", "V"):
        if key in fields:
            _validate_field(fields[key], source, src_pts, f"fields.{key}")
    return sc


def _int(obj, key, default, path, lo=1):
    v = obj.get(key, default) if isinstance(obj, dict) else default
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        raise ScenarioError(f"{path}.{key}: expected an integer >= {lo}")
    return v


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return scenario_from_dict(data, str(path))
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def builtin_names() -> list:
    files = resources.files("piola").joinpath("scenarios")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def builtin_data(name: str) -> dict:
    files = resources.files("piola").joinpath("scenarios")
    try:
        text = files.joinpath(name + ".json").read_text(encoding="utf-8")
    except (FileNotFoundError, OSError):
        raise ScenarioError(f"unknown built-in scenario {name!r}; available: {', '.join(builtin_names())}") from None
    return json.loads(text)


def load_builtin(name: str) -> Scenario:
    return scenario_from_dict(builtin_data(name), name)


# --------------------------------------------------------------------------
# random test fields


def _num(v: float) -> str:
    return repr(float(v))


def random_expression(rng: np.random.Generator, dim: int, amplitude: float = 1.0) -> str:
    """Random smooth expression: affine part, one product and one trig term."""
    c = rng.uniform(-1.0, 1.0, size=dim + 3) * amplitude
    terms = [_num(c[0])]
    terms += [f"{_num(c[i + 1])}*x{i}" for i in range(dim)]
    i, j = rng.integers(0, dim, size=2)
    terms.append(f"{_num(c[dim + 1])}*x{i}*x{j}")
    k = int(rng.integers(0, dim))
    fn = "sin" if rng.random() < 0.5 else "cos"
    terms.append(f"{_num(c[dim + 2])}*{fn}(x{k})")
    return " + ".join(terms)


def random_field(rng: np.random.Generator, dim: int, amplitude: float = 1.0) -> list:
    return [random_expression(rng, dim, amplitude) for _ in range(dim)]


# stream ids keep each family of random inputs independent of the others
_STREAMS = {"X": 1, "xi": 2, "V": 3, "W": 4, "beta": 5, "directions": 6}


def _rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng([seed, _STREAMS[stream]])


def _fields(sc: Scenario, key: str, count: int, seed: int) -> list:
    rng = _rng(seed, key)
    out = [sc.fields[key]] if key in sc.fields else []
    while len(out) < count:
        out.append(random_field(rng, sc.dim))
    return out


# --------------------------------------------------------------------------
# checks


@dataclass
class _Ctx:
    sc: Scenario
    seed: int
    count: int
    quad_order: int
    tol: dict
    points: np.ndarray


def _pointwise(ctx: _Ctx, name: str, fn: Callable, tolerance: float, points=None, **extra) -> CheckResult:
    pts = ctx.points if points is None else points
    res = []
    skipped = 0
    detail = {}
    for p in pts:
        try:
            res.append(fn(p))
        except GuardSkip as exc:
            skipped += 1
            detail.setdefault("first_skip", str(exc))
    try:
        coords = np.asarray(pts, dtype=float)
    except (TypeError, ValueError):
        coords = np.arange(len(res), dtype=float)  # composite cases carry no single point
    rep = ResidualReport(name, np.array(res, dtype=float), coords, tolerance, skipped, **extra)
    return _from_report(rep, detail)


def _from_report(rep: ResidualReport, detail=None) -> CheckResult:
    return CheckResult(rep.name, rep.status, rep.max, rep.mean, rep.tolerance, len(rep.residuals),
                       rep.skipped, dict(detail or {}))


def _scale(*arrays) -> float:
    return 1.0 + max(float(np.max(np.abs(a))) for a in arrays)


def check_euclidean_piola(ctx: _Ctx) -> CheckResult:
    m = ctx.sc.mapping

    def r(p):
        v, scale = core.euclidean_div_cof(m, p)
        return float(np.max(np.abs(v))) / (1.0 + scale)

    return _pointwise(ctx, "euclidean-piola", r, ctx.tol["pointwise"])


def check_riemannian_piola(ctx: _Ctx) -> CheckResult:
    m = ctx.sc.mapping
    worst_gap = [0.0]

    def r(p):
        C = core.cof_df_at(m, p)
        a = core.coderivative_cof_at(m, p)
        b = core.coderivative_cof_frame_at(m, p)
        s = _scale(C)
        worst_gap[0] = max(worst_gap[0], float(np.max(np.abs(a - b))) / s)
        return max(float(np.max(np.abs(a))), float(np.max(np.abs(b)))) / s

    out = _pointwise(ctx, "riemannian-piola", r, ctx.tol["pointwise"])
    out.detail["index_vs_frame"] = worst_gap[0]
    return out


def _x_fields(ctx: _Ctx) -> list:
    return [VectorFieldOnChart(ctx.sc.target, c) for c in _fields(ctx.sc, "X", 5, ctx.seed)]


def check_marsden_hughes(ctx: _Ctx) -> CheckResult:
    m = ctx.sc.mapping
    fields = _x_fields(ctx)
    pts = [(X, p) for X in fields for p in ctx.points]
    return _pointwise(ctx, "marsden-hughes",
                      lambda xp: core.residual_marsden_hughes(m, xp[0], xp[1], normalize=True),
                      ctx.tol["pointwise"], points=pts)


def check_generalized(ctx: _Ctx) -> CheckResult:
    m = ctx.sc.mapping
    fields = _x_fields(ctx)
    pts = [(X, p) for X in fields for p in ctx.points]
    return _pointwise(ctx, "generalized",
                      lambda xp: core.residual_generalized(m, xp[0], xp[1], normalize=True),
                      ctx.tol["pointwise"], points=pts)


def check_coordinate(ctx: _Ctx) -> CheckResult:
    m = ctx.sc.mapping
    trace_worst = [0.0]

    def r(p):
        full, simplified = core.residual_coordinate(m, p)
        st = core.point_state(m, p)
        trace_worst[0] = max(trace_worst[0], core.christoffel_trace_residual(m.target, st.fp))
        scale = 1.0 + abs(float(np.linalg.det(st.J))) * float(np.max(np.abs(np.einsum("bbc->c", st.gamma_tgt))))
        parts = (full, simplified, full + simplified)
        return max(float(np.max(np.abs(v))) for v in parts) / scale

    out = _pointwise(ctx, "coordinate", r, ctx.tol["pointwise"])
    out.detail["christoffel_trace"] = trace_worst[0]
    if trace_worst[0] > ctx.tol["pointwise"]:
        out.status = "fail"
    return out


def check_mh83_negative(ctx: _Ctx) -> CheckResult:
    sc = ctx.sc
    m = sc.mapping
    probe = np.array(sc.probe if sc.probe is not None
                     else [0.5 * (a + b) for a, b in zip(sc.source.lower, sc.source.upper)])
    published = core.residual_mh83_published(m, probe)
    full, _ = core.residual_coordinate(m, probe)
    rep = ResidualReport("mh83-negative", np.array([float(np.max(np.abs(published)))]), probe[None, :],
                         sc.mh83_floor, lower_bound=True)
    out = _from_report(rep, {
        "probe": probe.tolist(),
        "published": published.tolist(),
        "corrected": float(np.max(np.abs(full))),
    })
    if out.detail["corrected"] > ctx.tol["pointwise"]:
        out.status = "fail"
    if sc.mh83_expected is not None:
        err = float(np.max(np.abs(published - np.asarray(sc.mh83_expected, dtype=float))))
        out.detail["expected_error"] = err
        if err > 1e-10:
            out.status = "fail"
    return out


def _directions(ctx: _Ctx, n: int) -> np.ndarray:
    rng = _rng(ctx.seed, "directions")
    v = rng.normal(size=(n, ctx.sc.dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_cof_derivative(ctx: _Ctx) -> CheckResult:
    field_ = core.DifferentialField(ctx.sc.mapping)
    pts = ctx.points[:100]
    dirs = _directions(ctx, len(pts))

    def r(k):
        return core.check_cof_is_derivative_of_det(field_, pts[k], dirs[k])

    return _pointwise(ctx, "cof-derivative", r, ctx.tol["pointwise"], points=range(len(pts)))


def check_hodge_parallel(ctx: _Ctx) -> CheckResult:
    d = ctx.sc.dim
    rng = _rng(ctx.seed, "beta")
    pts = ctx.points[:100]
    dirs = _directions(ctx, len(pts))
    cases = []
    for chart in (ctx.sc.source, ctx.sc.target):
        bundle = core.TangentBundle(chart)
        # target-side points: the images of the sample points
        cpts = pts if chart is ctx.sc.source else [ctx.sc.mapping.value(p) for p in pts]
        for k in range(d + 1):
            beta = [random_expression(rng, d) for _ in range(comb(d, k))]
            cases += [(bundle, q, v, beta, k) for q, v in zip(cpts, dirs)]
    return _pointwise(ctx, "hodge-parallel", lambda c: core.check_hodge_parallel(*c),
                      ctx.tol["pointwise"], points=cases)


def check_null_lagrangian(ctx: _Ctx) -> CheckResult:
    sc = ctx.sc
    o = sc.variation_order
    ladder = (o - 4, o, o + 4)
    rules = {n: gauss_legendre(sc.source, n) for n in ladder}
    worst = {n: 0.0 for n in ladder}
    res = []
    sweep_worst = 0.0
    fd_worst = 0.0
    for comps in _fields(sc, "V", 5, ctx.seed):
        var = Variation(sc.mapping, VectorFieldOnChart(sc.source, comps), seed=ctx.seed)
        for n in ladder:
            worst[n] = max(worst[n], abs(first_variation(var, rules[n])))
        fv = first_variation(var, rules[o])
        h = sc.fd_step
        ts = np.linspace(-var.span, var.span, 9)
        es = varied_energies(var, rules[o], np.concatenate([[0.0], ts, [h, -h]]))
        dE = es[1:10] - es[0]
        fd = (es[10] - es[11]) / (2.0 * h)
        sweep_worst = max(sweep_worst, float(np.max(np.abs(dE))))
        fd_worst = max(fd_worst, float(abs(fv - fd)))
        res.append(max(abs(fv), float(np.max(np.abs(dE)))))
    rep = ResidualReport("null-lagrangian", np.array(res), np.zeros((len(res), sc.dim)), ctx.tol["integral"])
    out = _from_report(rep, {
        "order": o,
        "ladder": {str(n): worst[n] for n in ladder},
        "energy_sweep": sweep_worst,
        "fd_agreement": fd_worst,
    })
    values = [worst[n] for n in ladder]
    monotone = all(b <= a for a, b in zip(values, values[1:]))
    out.detail["monotone"] = monotone
    if not monotone or fd_worst > ctx.tol["fd"]:
        out.status = "fail"
    return out


def check_weak_form(ctx: _Ctx) -> CheckResult:
    sc = ctx.sc
    rule = gauss_legendre(sc.source, ctx.quad_order)
    res = []
    gap = 0.0
    for comps in _fields(sc, "xi", 10, ctx.seed):
        xi = VectorFieldOnChart(sc.source, comps)
        res.append(abs(weak_form_integral(sc.mapping, xi, rule)))
        gap = max(gap, adjointness_gap(sc.mapping, xi, rule))
    rep = ResidualReport("weak-form", np.array(res), np.zeros((len(res), sc.dim)), ctx.tol["integral"])
    out = _from_report(rep, {"order": ctx.quad_order, "adjointness_gap": gap})
    if gap > ctx.tol["adjoint"]:
        out.status = "fail"
    return out


AMPLITUDES = (1.0, 2.5, 5.0, 10.0)


def check_boundary_dependence(ctx: _Ctx) -> CheckResult:
    sc = ctx.sc
    if not sc.target.is_constant_metric:
        return CheckResult("boundary-dependence", "skip", 0.0, 0.0, ctx.tol["boundary"], 0,
                           detail={"reason": "target metric is not constant"})
    rule = gauss_legendre(sc.source, ctx.quad_order)
    W = VectorFieldOnChart(sc.source, _fields(sc, "W", 1, ctx.seed)[0])
    res = [boundary_dependence_check(sc.mapping, VariedMap(sc.mapping, W, a), rule) for a in AMPLITUDES]
    rep = ResidualReport("boundary-dependence", np.array(res), np.zeros((len(res), sc.dim)),
                         ctx.tol["boundary"])
    return _from_report(rep, {"order": ctx.quad_order, "amplitudes": list(AMPLITUDES)})


RUNNERS = {
    "euclidean-piola": check_euclidean_piola,
    "riemannian-piola": check_riemannian_piola,
    "marsden-hughes": check_marsden_hughes,
    "generalized": check_generalized,
    "coordinate": check_coordinate,
    "mh83-negative": check_mh83_negative,
    "cof-derivative": check_cof_derivative,
    "hodge-parallel": check_hodge_parallel,
    "null-lagrangian": check_null_lagrangian,
    "weak-form": check_weak_form,
    "boundary-dependence": check_boundary_dependence,
}


def run(sc: Scenario, *, seed: int | None = None, points: int | None = None,
        quad_order: int | None = None, tolerance: float | None = None) -> Report:
    """Run every requested check; a failing check never stops the others."""
    seed = sc.seed if seed is None else seed
    count = sc.count if points is None else points
    order = sc.quad_order if quad_order is None else quad_order
    tol = dict(sc.tolerances)
    if tolerance is not None:
        tol["pointwise"] = float(tolerance)
    ctx = _Ctx(sc, seed, count, order, tol, sample_points(sc.source, count, seed))
    results = []
    for name in sc.checks:
        try:
            results.append(RUNNERS[name](ctx))
        except (GeometryError, VariationError, ex.ExprError, ArithmeticError, ValueError) as exc:
            results.append(CheckResult(name, "fail", math.nan, math.nan, tol["pointwise"], 0,
                                       detail={"error": f"{type(exc).__name__}: {exc}"}))
    env = {
        "tolerances": tol,
        "points": count,
        "quadrature_order": order,
        "variation_order": sc.variation_order,
        "fd_step": sc.fd_step,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }
    return Report(sc.name, seed, results, env)


# --------------------------------------------------------------------------
# rendering


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _short(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.3e}"
    if isinstance(v, dict):
        return ", ".join(f"{k}={_short(x)}" for k, x in v.items())
    return str(v)


def render(report, fmt: str = "text") -> str:
    """``report`` may be a single :class:`Report` or a list of them."""
    reports = report if isinstance(report, list) else [report]
    if fmt == "json":
        payload = [_json_safe(r.as_dict()) for r in reports]
        doc = payload[0] if not isinstance(report, list) else payload
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    lines = []
    for r in reports:
        lines.append(f"scenario {r.scenario}  seed {r.seed}  verdict {r.verdict.upper()}")
        lines.append(f"  {'check':<22}{'status':<8}{'max':>12}{'mean':>12}{'tol':>10}{'points':>8}")
        for c in r.checks:
            lines.append(f"  {c.name:<22}{c.status:<8}{c.max_residual:>12.3e}{c.mean_residual:>12.3e}"
                         f"{c.tolerance:>10.1e}{c.points:>8d}")
            if c.status == "fail" and c.detail:
                for k in sorted(c.detail):
                    lines.append(f"      {k}: {_short(c.detail[k])}")
        lines.append("")
    return "\n".join(lines)
