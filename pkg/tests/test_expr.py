import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piola import expr as ex
from piola.dual import DualScalar


# random expressions that are finite on [-1, 1]^d: every risky node gets a
# guarded argument (log/sqrt of 2 + trig, division by 2 + trig, exp of trig)
def random_tree(rng, dim, depth=4):
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.6:
            return ex.Var(int(rng.integers(dim)))
        return ex.Const(float(np.round(rng.uniform(-2, 2), 3)))
    kind = rng.integers(10)
    a = random_tree(rng, dim, depth - 1)
    if kind < 3:
        b = random_tree(rng, dim, depth - 1)
        return [ex.Add, ex.Sub, ex.Mul][kind](a, b)
    if kind == 3:
        return ex.Sin(a)
    if kind == 4:
        return ex.Cos(a)
    if kind == 5:
        return ex.Exp(ex.Sin(a))
    if kind == 6:
        return ex.Log(ex.Add(ex.Const(2.0), ex.Cos(a)))
    if kind == 7:
        return ex.Sqrt(ex.Add(ex.Const(2.0), ex.Sin(a)))
    if kind == 8:
        return ex.Div(a, ex.Add(ex.Const(2.0), ex.Sin(random_tree(rng, dim, depth - 1))))
    return ex.Pow(ex.Add(ex.Const(1.5), ex.Cos(a)), int(rng.integers(-2, 4)))


def test_parse_example_structure():
    e = ex.parse("x0^2 + sin(x1)", 2)
    assert e == ex.Add(ex.Pow(ex.Var(0), 2), ex.Sin(ex.Var(1)))


def test_parse_out_of_range_variable():
    with pytest.raises(ex.ExprSyntaxError, match="variable index out of range"):
        ex.parse("x2", 2)


def test_parse_unknown_identifier():
    with pytest.raises(ex.ExprSyntaxError, match="unknown identifier"):
        ex.parse("tan(x0)", 1)


def test_syntax_error_reports_offset():
    with pytest.raises(ex.ExprSyntaxError) as info:
        ex.parse("x0 + * x1", 2)
    assert info.value.offset == 5


def test_syntax_error_offset_is_in_bytes():
    with pytest.raises(ex.ExprSyntaxError) as info:
        ex.parse("x0 + ü", 1)
    assert info.value.offset == 5
    with pytest.raises(ex.ExprSyntaxError) as info:
        ex.parse("x0 + (x0", 1)
    assert info.value.offset == len("x0 + (x0".encode())


def test_rational_expression_value():
    assert ex.evaluate(ex.parse("1/(1+x0^2+x1^2)", 2), [0.0, 0.0]) == 1.0


def test_evaluate_examples():
    assert ex.evaluate(ex.parse("x0*x1", 2), [3, 4]) == 12.0
    assert ex.evaluate(ex.parse("exp(0*x0)", 1), [7]) == 1.0


@pytest.mark.parametrize("text,point,node", [
    ("log(x0)", [-1.0], ex.Log),
    ("1 + sqrt(x0)", [-4.0], ex.Sqrt),
    ("1/x0", [0.0], ex.Div),
    ("x0^-2", [0.0], ex.Pow),
])
def test_domain_errors_name_the_node(text, point, node):
    with pytest.raises(ex.ExprDomainError) as info:
        ex.evaluate(ex.parse(text, 1), point)
    assert isinstance(info.value.node, node)
    assert ex.unparse(info.value.node) in str(info.value)


def test_unary_minus_binds_tighter_than_power():
    assert ex.evaluate(ex.parse("-x0^2", 1), [3.0]) == 9.0
    assert ex.evaluate(ex.parse("x0^-1", 1), [4.0]) == 0.25


def test_diff_examples():
    d = ex.diff(ex.parse("x0^2", 1), 0)
    for x in (-1.5, 0.0, 2.0):
        assert ex.evaluate(d, [x]) == 2 * x
    assert ex.diff(ex.parse("sin(x1)", 2), 0) == ex.Const(0.0)


def test_eval_dual_examples():
    r = ex.eval_dual(ex.parse("x0*x0", 1), [3.0], [1.0])
    assert (r.value, r.derivative) == (9.0, 6.0)
    r = ex.eval_dual(ex.parse("2.5", 2), [1.0, 2.0], [0.3, -0.7])
    assert (r.value, r.derivative) == (2.5, 0.0)


def _close(a, b, rel):
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def test_mixed_partials_commute():
    rng = np.random.default_rng(0)
    for _ in range(200):
        e = random_tree(rng, 2)
        p = rng.uniform(-1, 1, size=2)
        a = ex.evaluate(ex.diff(ex.diff(e, 0), 1), p)
        b = ex.evaluate(ex.diff(ex.diff(e, 1), 0), p)
        assert _close(a, b, 1e-12), ex.unparse(e)


def test_dual_matches_symbolic_derivative():
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(500):
        d = int(rng.integers(1, 4))
        e = random_tree(rng, d)
        p = rng.uniform(-1, 1, size=d)
        v = rng.normal(size=d)
        r = ex.eval_dual(e, p, v)
        assert r.value == ex.evaluate(e, p)
        sym = sum(v[i] * ex.evaluate(ex.diff(e, i), p) for i in range(d))
        if abs(sym) >= 1e-6:
            assert abs(r.derivative - sym) <= 1e-13 * abs(sym), ex.unparse(e)
            checked += 1
        else:
            assert abs(r.derivative - sym) <= 1e-13
    assert checked > 300


def test_compiled_batch_agrees_with_interpreter():
    rng = np.random.default_rng(2)
    exprs = [random_tree(rng, 3) for _ in range(30)]
    fn = ex.compile_exprs(exprs)
    for _ in range(20):
        p = list(rng.uniform(-1, 1, size=3))
        assert fn(p) == [ex.evaluate(e, p) for e in exprs]


def test_compiled_batch_reports_domain_node():
    fn = ex.compile_exprs([ex.parse("x0 + 1", 1), ex.parse("log(x0 - 2)", 1)])
    with pytest.raises(ex.ExprDomainError) as info:
        fn([1.0])
    assert isinstance(info.value.node, ex.Log)


def test_compiled_batch_accepts_duals():
    fn = ex.compile_exprs([ex.parse("x0*sin(x1)", 2)])
    (r,) = fn([DualScalar(2.0, 1.0), DualScalar(0.5, 0.0)])
    assert r.value == 2.0 * math.sin(0.5)
    assert r.derivative == math.sin(0.5)


_names = st.sampled_from(["x0", "x1", "x2"])
_numbers = st.one_of(st.integers(0, 50).map(str), st.floats(0.01, 100, allow_nan=False).map(repr))
_atoms = st.one_of(_names, _numbers)


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/"), children).map(lambda t: f"({t[0]}{t[1]}{t[2]})"),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "log", "sqrt"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda c: f"-({c})"),
        st.tuples(children, st.integers(-3, 4)).map(lambda t: f"({t[0]})^{t[1]}"),
    )


expressions = st.recursive(_atoms, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(expressions)
def test_parse_unparse_round_trip(text):
    e = ex.parse(text, 3)
    again = ex.parse(ex.unparse(e), 3)
    assert again == e
    assert ex.parse(ex.unparse(again), 3) == e


@given(st.text(alphabet="x0123+-*/^() .es", max_size=20))
@settings(max_examples=300, deadline=None)
def test_parse_never_crashes_unexpectedly(text):
    try:
        ex.parse(text, 4)
    except ex.ExprError:
        pass


def test_max_var_index():
    assert ex.max_var_index(ex.parse("3 + sin(x2)*x0", 3)) == 2
    assert ex.max_var_index(ex.parse("3", 1)) == -1
