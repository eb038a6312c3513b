"""Scalar expressions over chart coordinates.

Expressions are immutable trees built from constants, coordinate variables
``x0 .. x{d-1}``, the four arithmetic operators, integer powers and the
unary functions ``sin``, ``cos``, ``exp``, ``log`` and ``sqrt``.  They can
be parsed from infix text, evaluated on plain floats or on
:class:`~piola.dual.DualScalar` values, and differentiated symbolically.

Grammar accepted by :func:`parse`::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := unary ('^' integer)?
    unary  := '-'? atom
    atom   := number | ident | func '(' expr ')' | '(' expr ')'
    ident  := 'x' digits
    func   := sin | cos | exp | log | sqrt

Note that unary minus binds tighter than ``^``: ``-x0^2`` is ``(-x0)^2``.
The exponent may carry a sign (``x1^-2``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, ClassVar, Sequence

from piola import dual
from piola.dual import DualScalar

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Neg", "Pow",
    "Sin", "Cos", "Exp", "Log", "Sqrt",
    "ExprError", "ExprSyntaxError", "ExprDomainError",
    "parse", "unparse", "evaluate", "eval_dual", "diff", "compile_exprs",
    "max_var_index",
]


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class ExprDomainError(ExprError, ArithmeticError):
    def __init__(self, message: str, node: "Expr"):
        self.node = node
        super().__init__(f"{message} in {unparse(node)!r}")


# --------------------------------------------------------------------------
# nodes


@dataclass(frozen=True)
class Expr:
    def __str__(self) -> str:
        return unparse(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or isinstance(self.exponent, bool):
            raise TypeError("Pow exponent must be an int")


@dataclass(frozen=True)
class _Unary(Expr):
    arg: Expr
    name: ClassVar[str] = ""


@dataclass(frozen=True)
class Sin(_Unary):
    name: ClassVar[str] = "sin"


@dataclass(frozen=True)
class Cos(_Unary):
    name: ClassVar[str] = "cos"


@dataclass(frozen=True)
class Exp(_Unary):
    name: ClassVar[str] = "exp"


@dataclass(frozen=True)
class Log(_Unary):
    name: ClassVar[str] = "log"


@dataclass(frozen=True)
class Sqrt(_Unary):
    name: ClassVar[str] = "sqrt"


FUNCTIONS = {cls.name: cls for cls in (Sin, Cos, Exp, Log, Sqrt)}
_BINARY_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/"}

ZERO = Const(0.0)
ONE = Const(1.0)


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos), text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(message, _byte_offset(self.text, tok[2]), self.text)

    def expect(self, value):
        tok = self.advance()
        if tok[1] != value or tok[0] == "end":
            raise self.error(f"expected {value!r}", tok)
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self) -> Expr:
        e = self.unary()
        if self.peek()[1] == "^":
            self.advance()
            sign = 1
            if self.peek()[1] in ("+", "-"):
                sign = -1 if self.advance()[1] == "-" else 1
            tok = self.advance()
            if tok[0] != "number" or not tok[1].isdigit():
                raise self.error("exponent must be an integer", tok)
            e = Pow(e, sign * int(tok[1]))
        return e

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.advance()
            return Neg(self.atom())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.advance()
        kind, text, _ = tok
        if kind == "number":
            return Const(float(text))
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return FUNCTIONS[text](arg)
            m = re.fullmatch(r"x(\d+)", text)
            if m is None:
                raise self.error(f"unknown identifier {text!r}", tok)
            index = int(m.group(1))
            if index >= self.dim:
                raise self.error(f"variable index out of range: {text} with dim {self.dim}", tok)
            return Var(index)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise self.error("unexpected end of input", tok)
        raise self.error(f"unexpected token {text!r}", tok)


def parse(text: str, dim: int) -> Expr:
    """Parse infix ``text`` over variables ``x0 .. x{dim-1}``.

    >>> parse("x0^2 + sin(x1)", 2)
    Add(left=Pow(base=Var(index=0), exponent=2), right=Sin(arg=Var(index=1)))
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    return _Parser(text, dim).parse()


# --------------------------------------------------------------------------
# printing

def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v)) if v >= 0 else f"({int(v)})"
    return repr(v) if v >= 0 else f"({v!r})"


def _atom(e: Expr) -> str:
    if isinstance(e, (Const, Var, _Unary)):
        return unparse(e)
    return f"({unparse(e)})"


def _unary_str(e: Expr) -> str:
    if isinstance(e, Neg):
        return "-" + _atom(e.arg)
    return _atom(e)


def unparse(e: Expr) -> str:
    """Render ``e`` as text that :func:`parse` maps back to the same tree."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, _Unary):
        return f"{e.name}({unparse(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _atom(e.arg)
    if isinstance(e, Pow):
        return f"{_unary_str(e.base)}^{e.exponent}"
    if isinstance(e, (Add, Sub)):
        right = unparse(e.right)
        if isinstance(e.right, (Add, Sub)):
            right = f"({right})"
        return f"{unparse(e.left)} {_BINARY_SYMBOL[type(e)]} {right}"
    if isinstance(e, (Mul, Div)):
        left = unparse(e.left)
        if isinstance(e.left, (Add, Sub)):
            left = f"({left})"
        right = e.right
        if isinstance(right, (Pow, Neg)):
            rs = unparse(right)
        else:
            rs = _atom(right)
        return f"{left}{_BINARY_SYMBOL[type(e)]}{rs}"
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# evaluation

def _check_domain(node, name, x):
    v = dual.value_of(x)
    if name == "log" and not v > 0.0:
        raise ExprDomainError(f"log of non-positive value {v!r}", node)
    if name == "sqrt" and v < 0.0:
        raise ExprDomainError(f"sqrt of negative value {v!r}", node)


_UNARY_FN = {"sin": dual.sin, "cos": dual.cos, "exp": dual.exp, "log": dual.log, "sqrt": dual.sqrt}


def _interp(e: Expr, x: Sequence):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return x[e.index]
    if isinstance(e, Add):
        return _interp(e.left, x) + _interp(e.right, x)
    if isinstance(e, Sub):
        return _interp(e.left, x) - _interp(e.right, x)
    if isinstance(e, Mul):
        return _interp(e.left, x) * _interp(e.right, x)
    if isinstance(e, Div):
        den = _interp(e.right, x)
        if dual.value_of(den) == 0.0:
            raise ExprDomainError("division by zero", e)
        return _interp(e.left, x) / den
    if isinstance(e, Neg):
        return -_interp(e.arg, x)
    if isinstance(e, Pow):
        base = _interp(e.base, x)
        if e.exponent < 0 and dual.value_of(base) == 0.0:
            raise ExprDomainError("negative power of zero", e)
        return base ** e.exponent
    if isinstance(e, _Unary):
        a = _interp(e.arg, x)
        _check_domain(e, e.name, a)
        try:
            return _UNARY_FN[e.name](a)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise ExprDomainError(str(exc), e) from exc
    raise TypeError(f"not an expression: {e!r}")


def _finite_or_raise(e, result):
    if not math.isfinite(dual.value_of(result)):
        raise ExprDomainError("non-finite result", e)
    return result


def evaluate(e: Expr, point: Sequence[float]) -> float:
    """IEEE-754 double evaluation of ``e`` at ``point``.

    Domain problems (log of a non-positive number, sqrt of a negative one,
    division by zero) raise :class:`ExprDomainError` naming the node.
    """
    point = [float(v) for v in point]
    _check_point(e, point)
    return _finite_or_raise(e, _interp(e, point))


def eval_dual(e: Expr, point: Sequence[float], direction: Sequence[float]) -> DualScalar:
    """Evaluate ``e`` and its directional derivative along ``direction``."""
    if len(point) != len(direction):
        raise ValueError("point and direction lengths differ")
    _check_point(e, point)
    x = [DualScalar(p, v) for p, v in zip(point, direction)]
    r = _interp(e, x)
    if not isinstance(r, DualScalar):
        r = DualScalar(r, 0.0)
    return _finite_or_raise(e, r)


def _check_point(e, point):
    need = max_var_index(e) + 1
    if len(point) < need:
        raise ValueError(f"point has length {len(point)} but expression uses x{need - 1}")


def max_var_index(e: Expr) -> int:
    """Largest variable index appearing in ``e`` (-1 if none)."""
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Const):
        return -1
    if isinstance(e, (Add, Sub, Mul, Div)):
        return max(max_var_index(e.left), max_var_index(e.right))
    if isinstance(e, Pow):
        return max_var_index(e.base)
    return max_var_index(e.arg)


# compiled evaluation: one Python function per batch of expressions

def _py(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x[{e.index}]"
    if isinstance(e, (Add, Sub, Mul, Div)):
        return f"({_py(e.left)} {_BINARY_SYMBOL[type(e)]} {_py(e.right)})"
    if isinstance(e, Neg):
        return f"(-{_py(e.arg)})"
    if isinstance(e, Pow):
        return f"({_py(e.base)} ** {e.exponent})"
    if isinstance(e, _Unary):
        return f"{e.name}({_py(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


def _guarded(fn):
    def g(a):
        try:
            return fn(a)
        except (ValueError, OverflowError) as exc:
            raise ArithmeticError(str(exc)) from exc
    return g


_NAMESPACE = {name: _guarded(fn) for name, fn in _UNARY_FN.items()}


def compile_exprs(exprs: Sequence[Expr]) -> Callable[[Sequence], list]:
    """Compile a batch of expressions into one callable ``x -> [values]``.

    The callable accepts floats or dual numbers.  On any arithmetic failure
    it falls back to the interpreter so the error names the offending node.
    """
    exprs = list(exprs)
    body = ", ".join(_py(e) for e in exprs)
    code = compile(f"lambda x: [{body}]", "<expr>", "eval")
    fast = eval(code, dict(_NAMESPACE))  # noqa: S307 - source generated from the AST above

    def run(x):
        try:
            out = fast(x)
        except (ArithmeticError, ZeroDivisionError):
            for e in exprs:
                _interp(e, x)
            raise
        for e, v in zip(exprs, out):
            if not math.isfinite(dual.value_of(v)):
                _interp(e, x)
                raise ExprDomainError("non-finite result", e)
        return out

    return run


# --------------------------------------------------------------------------
# differentiation (with light constant folding so repeated diff stays small)

def _is(e, v):
    return isinstance(e, Const) and e.value == v


def _add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def _sub(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return _neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def _mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def _div(a, b):
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Div(a, b)


def _neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _pow(a, n):
    if n == 0:
        return ONE
    if n == 1:
        return a
    return Pow(a, n)


def diff(e: Expr, var: int) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``x{var}``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == var else ZERO
    if isinstance(e, Add):
        return _add(diff(e.left, var), diff(e.right, var))
    if isinstance(e, Sub):
        return _sub(diff(e.left, var), diff(e.right, var))
    if isinstance(e, Mul):
        return _add(_mul(diff(e.left, var), e.right), _mul(e.left, diff(e.right, var)))
    if isinstance(e, Div):
        du, dv = diff(e.left, var), diff(e.right, var)
        if _is(dv, 0.0):
            return _div(du, e.right)
        return _div(_sub(_mul(du, e.right), _mul(e.left, dv)), _pow(e.right, 2))
    if isinstance(e, Neg):
        return _neg(diff(e.arg, var))
    if isinstance(e, Pow):
        db = diff(e.base, var)
        if _is(db, 0.0):
            return ZERO
        return _mul(_mul(Const(float(e.exponent)), _pow(e.base, e.exponent - 1)), db)
    if isinstance(e, _Unary):
        da = diff(e.arg, var)
        if _is(da, 0.0):
            return ZERO
        a = e.arg
        if isinstance(e, Sin):
            outer = Cos(a)
        elif isinstance(e, Cos):
            outer = _neg(Sin(a))
        elif isinstance(e, Exp):
            outer = e
        elif isinstance(e, Log):
            return _div(da, a)
        else:  # Sqrt
            return _div(da, _mul(Const(2.0), e))
        return _mul(outer, da)
    raise TypeError(f"not an expression: {e!r}")
