import math

import numpy as np
import pytest

from conftest import HYPERBOLIC, POLAR, SPHERE
from piola.chart import Chart, ChartMap, VectorFieldOnChart, christoffel_at, sample_points
from piola.core import (
    DIFFEO_GUARD, DifferentialField, FrameBundle, GuardSkip, SyntheticBundleMap, TangentBundle,
    check_cof_is_derivative_of_det, check_hodge_parallel, christoffel_trace_residual, cof_df_at,
    cof_jet, coderivative_cof_at, coderivative_cof_frame_at, coordinate_cof_identity_residual,
    coordinate_det_df_at, covariant_derivative_cof_at, det_df_at, det_directional_fd,
    differential_at, divergence_at, divergence_christoffel_at, euclidean_div_cof,
    piola_transform_at, piola_transform_via_inverse, residual_coordinate, residual_generalized,
    residual_marsden_hughes, residual_mh83_published,
)


def euclidean_map(box_s, box_t, comps):
    d = len(box_s)
    return ChartMap(Chart.euclidean(d, box_s), Chart.euclidean(d, box_t), comps)


# ---------------------------------------------------------------- differential and Det


def test_differential_example():
    f = euclidean_map([[0, 2], [0, 3]], [[0, 5], [0, 7]], ["x0^2", "x0*x1"])
    assert np.array_equal(differential_at(f, [1.0, 2.0]).matrix, [[2.0, 0.0], [2.0, 1.0]])


def test_differential_matches_central_differences(sphere_map):
    # central differences are second order: halving h cuts the error by about 4
    p = np.array([0.3, -0.2])
    J = differential_at(sphere_map, p).matrix
    errs = []
    for h in (1e-2, 5e-3):
        fd = np.column_stack([(sphere_map.value(p + h * e) - sphere_map.value(p - h * e)) / (2 * h)
                              for e in np.eye(2)])
        errs.append(np.max(np.abs(fd - J)))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_det_of_swap_is_minus_one():
    f = euclidean_map([[0, 1], [0, 1]], [[0, 1], [0, 1]], ["x1", "x0"])
    assert det_df_at(f, [0.3, 0.6]) == -1.0


def test_det_of_antipodal_inversion():
    f = euclidean_map([[0.5, 1], [0.5, 1]], [[-2.5, 0], [-2.5, 0]],
                      ["-x0/(x0^2+x1^2)", "-x1/(x0^2+x1^2)"])
    for p in sample_points(f.source, 20, seed=0):
        r2 = p @ p
        assert det_df_at(f, p) == pytest.approx(-1.0 / r2 ** 2, rel=1e-12)


def test_det_matches_coordinate_formula(hyperbolic_map, sphere_map):
    for f in (hyperbolic_map, sphere_map):
        for p in sample_points(f.source, 50, seed=1):
            assert det_df_at(f, p) == pytest.approx(coordinate_det_df_at(f, p), rel=1e-12)


def test_cof_of_3d_dilation():
    lam = 1.7
    f = euclidean_map([[0, 1]] * 3, [[0, 2]] * 3, [f"{lam}*x0", f"{lam}*x1", f"{lam}*x2"])
    assert np.allclose(cof_df_at(f, [0.2, 0.4, 0.6]), lam ** 2 * np.eye(3), atol=1e-14)


def test_cof_coordinate_identity(hyperbolic_map, aniso_map):
    for f in (hyperbolic_map, aniso_map):
        for p in sample_points(f.source, 50, seed=2):
            assert coordinate_cof_identity_residual(f, p) <= 1e-12


# ---------------------------------------------------------------- covariant derivative of Cof


def test_cof_jet_matches_finite_differences(sphere_map):
    h = 1e-5
    for p in sample_points(sphere_map.source, 20, seed=3):
        _, dC = cof_jet(sphere_map, p)
        for i in range(2):
            e = np.eye(2)[i] * h
            fd = (cof_df_at(sphere_map, p + e) - cof_df_at(sphere_map, p - e)) / (2 * h)
            assert np.max(np.abs(dC[i] - fd)) <= 1e-8


def test_covariant_derivative_vanishes_for_linear_euclidean_maps():
    f = euclidean_map([[0, 1]] * 3, [[-5, 5]] * 3, ["x0 + 2*x1", "x1 - x2", "3*x2 + x0"])
    N = covariant_derivative_cof_at(f, [0.3, 0.3, 0.3])
    assert np.array_equal(N, np.zeros((3, 3, 3)))


def test_covariant_derivative_of_identity_on_curved_chart():
    # Cof(id) is the identity endomorphism, which is parallel
    C = Chart.from_strings(2, [[-1, 1], [-1, 1]], SPHERE)
    f = ChartMap(C, C, ["x0", "x1"])
    for p in sample_points(C, 20, seed=4):
        assert np.max(np.abs(covariant_derivative_cof_at(f, p))) <= 1e-12


def test_coderivative_index_and_frame_paths_agree(hyperbolic_map, sphere_map, aniso_map):
    for f in (hyperbolic_map, sphere_map, aniso_map):
        for p in sample_points(f.source, 100, seed=5):
            a = coderivative_cof_at(f, p)
            b = coderivative_cof_frame_at(f, p)
            assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, np.max(np.abs(a)))


def test_coderivative_vanishes_for_diffeomorphisms(hyperbolic_map):
    for p in sample_points(hyperbolic_map.source, 50, seed=6):
        assert np.max(np.abs(coderivative_cof_at(hyperbolic_map, p))) <= 1e-10


# ---------------------------------------------------------------- Piola transform and divergence


def test_piola_of_dilation():
    lam = 3.0
    f = euclidean_map([[0, 1], [0, 1]], [[0, 3], [0, 3]], [f"{lam}*x0", f"{lam}*x1"])
    X = VectorFieldOnChart(f.target, ["1", "0"])
    assert np.allclose(piola_transform_at(f, X, [0.5, 0.5]), [lam, 0.0], atol=1e-14)


def test_piola_agrees_with_inverse_formula(hyperbolic_map, sphere_map):
    for f in (hyperbolic_map, sphere_map):
        X = VectorFieldOnChart(f.target, ["sin(x1) + x0", "x0*x1 - 0.5"])
        for p in sample_points(f.source, 50, seed=7):
            a = piola_transform_at(f, X, p)
            b = piola_transform_via_inverse(f, X, p)
            assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, np.max(np.abs(b)))


def test_divergence_of_radial_field(euclid2):
    X = VectorFieldOnChart(euclid2, ["x0", "x1"])
    assert divergence_at(X, [0.3, 0.8]) == pytest.approx(2.0, abs=1e-15)


def test_divergence_formulas_agree():
    for metric, box in [(SPHERE, [[-1, 1], [-1, 1]]), (HYPERBOLIC, [[-1, 1], [0.5, 1.5]]),
                        (POLAR, [[1, 2], [0, 1]])]:
        C = Chart.from_strings(2, box, metric)
        X = VectorFieldOnChart(C, ["x0*x1 + cos(x1)", "exp(0.3*x0) - x1^2"])
        for p in sample_points(C, 50, seed=8):
            assert divergence_at(X, p) == pytest.approx(divergence_christoffel_at(X, p), rel=1e-11, abs=1e-12)


def test_divergence_on_polar_chart():
    # X = d/dr in polar coordinates is the unit radial field; its divergence is 1/r
    C = Chart.from_strings(2, [[1, 2], [0, 1]], POLAR)
    X = VectorFieldOnChart(C, ["1", "0"])
    assert divergence_at(X, [1.25, 0.4]) == pytest.approx(0.8, abs=1e-14)


# ---------------------------------------------------------------- Piola identities


def test_marsden_hughes_identity_map_is_exact():
    C = Chart.from_strings(2, [[-1, 1], [-1, 1]], SPHERE)
    f = ChartMap(C, C, ["x0", "x1"])
    X = VectorFieldOnChart(C, ["sin(x0*x1)", "x0 - x1^2"])
    for p in sample_points(C, 20, seed=9):
        assert residual_marsden_hughes(f, X, p) <= 1e-13


def test_marsden_hughes_on_curved_maps(hyperbolic_map, sphere_map, aniso_map):
    for f in (hyperbolic_map, sphere_map, aniso_map):
        X = VectorFieldOnChart(f.target, ["cos(x0) + 0.3*x1", "x0*x1"])
        for p in sample_points(f.source, 100, seed=10):
            assert residual_marsden_hughes(f, X, p, normalize=True) <= 1e-10


def test_marsden_hughes_guard_skips_degenerate_points():
    f = euclidean_map([[-1, 1], [-1, 1]], [[-1, 1], [-1, 1]], ["x0", "x1^3"])
    X = VectorFieldOnChart(f.target, ["x0", "x1"])
    with pytest.raises(GuardSkip):
        residual_marsden_hughes(f, X, [0.2, 1e-4])
    assert abs(det_df_at(f, [0.2, 1e-4])) < DIFFEO_GUARD


def test_generalized_identity_for_collapsing_map():
    f = euclidean_map([[0, 1], [0, 1]], [[-1, 2], [-1, 1]], ["x0", "0"])
    X = VectorFieldOnChart(f.target, ["x0^2 + x1", "sin(x0)"])
    for p in sample_points(f.source, 20, seed=11):
        assert residual_generalized(f, X, p) <= 1e-13
        with pytest.raises(GuardSkip):
            residual_marsden_hughes(f, X, p)


def test_generalized_identity_rank_deficient_curved_target():
    S = Chart.euclidean(2, [[0, 1], [0, 1]])
    T = Chart.from_strings(2, [[-0.5, 2.5], [-0.5, 4.5]],
                           [["1+x0^2", "0.1*x0"], ["0.1*x0", "exp(x1/4)"]])
    f = ChartMap(S, T, ["x0+x1", "(x0+x1)^2"])
    X = VectorFieldOnChart(T, ["x1 - 0.5*x0", "cos(x0)"])
    for p in sample_points(S, 50, seed=12):
        assert residual_generalized(f, X, p, normalize=True) <= 1e-10


# ---------------------------------------------------------------- coordinate forms


def test_coordinate_forms_in_three_dimensions():
    S = Chart.euclidean(3, [[0, 1]] * 3)
    T = Chart.from_strings(3, [[-1, 2]] * 3, [["1+x1^2", "0", "0.1*x0"], ["0", "exp(x2/3)", "0"],
                                              ["0.1*x0", "0", "2+sin(x0)"]])
    f = ChartMap(S, T, ["x0 + 0.2*sin(x1*x2)", "x1 + 0.1*cos(x0) - 0.1*x2^2", "x2 + 0.15*x0*x1"])
    for p in sample_points(S, 30, seed=13):
        full, simp = residual_coordinate(f, p)
        assert np.max(np.abs(simp)) <= 1e-12
        assert np.max(np.abs(full + simp)) <= 1e-11
        assert christoffel_trace_residual(T, f.value(p)) <= 1e-12


def test_euclidean_div_cof_vanishes():
    f = euclidean_map([[0, 1]] * 3, [[-2, 3]] * 3, ["x0*x1 + sin(x2)", "exp(x0) - x2", "x1^3 + x0*x2"])
    vec, scale = euclidean_div_cof(f, [0.3, 0.6, 0.2])
    assert scale > 0.1
    assert np.max(np.abs(vec)) <= 1e-14 * max(1.0, scale) * 10


def test_published_coordinate_form_on_polar_target():
    S = Chart.euclidean(2, [[1, 2], [0, 1]])
    T = Chart.from_strings(2, [[1, 2], [0, 1]], POLAR)
    f = ChartMap(S, T, ["x0", "x1"])
    assert np.array_equal(residual_mh83_published(f, [1.5, 0.5]), [1.0, 0.0])
    full, simp = residual_coordinate(f, [1.5, 0.5])
    assert np.max(np.abs(full)) <= 1e-15 and np.max(np.abs(simp)) <= 1e-15


def test_published_form_vanishes_on_flat_target():
    f = euclidean_map([[0, 1]] * 2, [[-1, 2]] * 2, ["x0 + 0.3*x1^2", "x1 - 0.2*sin(x0)"])
    assert np.max(np.abs(residual_mh83_published(f, [0.4, 0.7]))) <= 1e-14


# ---------------------------------------------------------------- Cof as derivative of Det


def synthetic_field():
    base = Chart.from_strings(2, [[0, 1], [0, 1]], [["1+0.5*x0^2", "0.2*x1"], ["0.2*x1", "2+sin(x0)"]])
    E = FrameBundle(base, [["2+x0", "0.3*x1", "0"], ["0.3*x1", "1+x1^2", "0.1"], ["0", "0.1", "1.5"]],
                    skew=[0.1, 0.2, -0.3, 0.0, 0.4, 0.5, 0.0, 0.0, 0.0,
                          0.0, -0.2, 0.1, 0.3, 0.0, 0.0, 0.2, 0.1, 0.0])
    F = FrameBundle(base, [["1+x0*x1", "0", "0.2*x0"], ["0", "3", "0"], ["0.2*x0", "0", "1+cos(x1)"]])
    A = SyntheticBundleMap(E, F, [["1+x0", "sin(x1)", "0.3"], ["x0*x1", "2", "cos(x0)"],
                                  ["0.5", "x1^2", "1-x0"]])
    return A


def test_frame_bundle_connection_is_metric(rng):
    A = synthetic_field()
    for bundle in (A.source, A.target):
        p = np.array([0.4, 0.7])
        gam = bundle.connection_at(p)
        for i in range(2):
            G = bundle.gram_dual(p, np.eye(2)[i])
            G0 = np.array([[g.value for g in r] for r in G])
            dG = np.array([[g.derivative for g in r] for r in G])
            # d_i <e_a, e_b> = <nabla_i e_a, e_b> + <e_a, nabla_i e_b>
            rhs = gam[i].T @ G0 + G0 @ gam[i]
            assert np.allclose(dG, rhs, atol=1e-12)


def test_cof_is_derivative_of_det_synthetic(rng):
    A = synthetic_field()
    for p in sample_points(A.source.chart, 30, seed=14):
        X = rng.normal(size=2)
        assert check_cof_is_derivative_of_det(A, p, X) <= 1e-11


def test_cof_is_derivative_of_det_differential(sphere_map, rng):
    field = DifferentialField(sphere_map)
    for p in sample_points(sphere_map.source, 30, seed=15):
        assert check_cof_is_derivative_of_det(field, p, rng.normal(size=2)) <= 1e-11


def test_det_difference_quotient_is_second_order():
    A = synthetic_field()
    p, X = np.array([0.5, 0.5]), np.array([0.6, -0.8])
    G, GE, GF = A.jet(p, X)
    from piola.exterior import LinearMap, OrientedInnerProductSpace, intrinsic_det
    exact = intrinsic_det(LinearMap(OrientedInnerProductSpace(GE), OrientedInnerProductSpace(GF), G)).derivative
    hs = [1e-2, 1e-3]
    errs = [abs(det_directional_fd(A, p, X, h) - exact) for h in hs]
    slope = math.log(errs[0] / errs[1]) / math.log(hs[0] / hs[1])
    assert 1.8 <= slope <= 2.2


# ---------------------------------------------------------------- Hodge star parallelism


BETAS = {
    0: ["sin(x0) + x1"],
    1: ["x0*x1", "cos(x1) - x0"],
    2: ["exp(0.5*x0) + x1^2"],
}


@pytest.mark.parametrize("k", [0, 1, 2])
def test_hodge_star_is_parallel_on_tangent_bundle(k, rng):
    C = Chart.from_strings(2, [[-1, 1], [-1, 1]], SPHERE)
    T = TangentBundle(C)
    for p in sample_points(C, 20, seed=16):
        assert check_hodge_parallel(T, p, rng.normal(size=2), BETAS[k], k) <= 1e-12


def test_hodge_star_is_parallel_on_frame_bundle(rng):
    A = synthetic_field()
    betas = {0: ["x0"], 1: ["x0", "x1^2", "sin(x0)"], 2: ["x1", "1", "x0*x1"], 3: ["cos(x1)"]}
    for k, beta in betas.items():
        for p in sample_points(A.source.chart, 10, seed=17):
            assert check_hodge_parallel(A.source, p, rng.normal(size=2), beta, k) <= 1e-11


def test_hodge_star_not_parallel_for_incompatible_connection():
    C = Chart.from_strings(2, [[-1, 1], [-1, 1]], SPHERE)
    T = TangentBundle(C)
    p = np.array([0.2, -0.3])
    gam = T.connection_at(p).copy()
    gam[0, 0, 0] += 0.1
    r = check_hodge_parallel(T, p, [1.0, 0.0], BETAS[1], 1, connection=gam)
    assert r >= 1e-3


def test_tangent_connection_uses_christoffel_symbols():
    C = Chart.from_strings(2, [[1, 2], [0, 1]], POLAR)
    gam = TangentBundle(C).connection_at([2.0, 0.5])
    G = christoffel_at(C, [2.0, 0.5])
    assert gam[1, 0, 1] == G[0, 1, 1]
