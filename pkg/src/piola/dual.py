"""First-order dual numbers for forward-mode differentiation.

A :class:`DualScalar` carries a value and the derivative of that value
along a single seeded direction.  The arithmetic below performs exactly the
same floating-point operations on the value component as plain ``float``
arithmetic would, so running a generic algorithm on duals reproduces the
plain-real result bit-for-bit in the value part.
"""

from __future__ import annotations

import math
from typing import Union

Real = Union[float, int]


class DualScalar:
    """Dual number ``value + derivative * eps`` with ``eps**2 = 0``."""

    __slots__ = ("value", "derivative")

    def __init__(self, value: float, derivative: float = 0.0):
        self.value = float(value)
        self.derivative = float(derivative)

    def __repr__(self) -> str:
        return f"DualScalar({self.value!r}, {self.derivative!r})"

    def __eq__(self, other) -> bool:
        if isinstance(other, DualScalar):
            return self.value == other.value and self.derivative == other.derivative
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.value, self.derivative))

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, DualScalar):
            return DualScalar(self.value + other.value, self.derivative + other.derivative)
        if isinstance(other, (int, float)):
            return DualScalar(self.value + other, self.derivative)
        return NotImplemented

    def __radd__(self, other):
        if isinstance(other, (int, float)):
            return DualScalar(other + self.value, self.derivative)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, DualScalar):
            return DualScalar(self.value - other.value, self.derivative - other.derivative)
        if isinstance(other, (int, float)):
            return DualScalar(self.value - other, self.derivative)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, (int, float)):
            return DualScalar(other - self.value, -self.derivative)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, DualScalar):
            return DualScalar(
                self.value * other.value,
                self.derivative * other.value + self.value * other.derivative,
            )
        if isinstance(other, (int, float)):
            return DualScalar(self.value * other, self.derivative * other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return DualScalar(other * self.value, other * self.derivative)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, DualScalar):
            if other.value == 0.0:
                raise ZeroDivisionError("dual division by zero")
            q = self.value / other.value
            return DualScalar(q, (self.derivative - q * other.derivative) / other.value)
        if isinstance(other, (int, float)):
            return DualScalar(self.value / other, self.derivative / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, float)):
            if self.value == 0.0:
                raise ZeroDivisionError("dual division by zero")
            q = other / self.value
            return DualScalar(q, -q * self.derivative / self.value)
        return NotImplemented

    def __neg__(self):
        return DualScalar(-self.value, -self.derivative)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, int):
            return NotImplemented
        if n == 0:
            return DualScalar(1.0, 0.0)
        value = self.value ** n
        return DualScalar(value, n * self.value ** (n - 1) * self.derivative)

    def __abs__(self):
        return -self if self.value < 0 else self

    # elementary functions ----------------------------------------------
    def sin(self) -> "DualScalar":
        return DualScalar(math.sin(self.value), math.cos(self.value) * self.derivative)

    def cos(self) -> "DualScalar":
        return DualScalar(math.cos(self.value), -math.sin(self.value) * self.derivative)

    def exp(self) -> "DualScalar":
        e = math.exp(self.value)
        return DualScalar(e, e * self.derivative)

    def log(self) -> "DualScalar":
        return DualScalar(math.log(self.value), self.derivative / self.value)

    def sqrt(self) -> "DualScalar":
        s = math.sqrt(self.value)
        if s == 0.0:
            raise ValueError("derivative of sqrt at 0")
        return DualScalar(s, self.derivative / (2.0 * s))


def value_of(x) -> float:
    """Plain value of a real or dual scalar."""
    return x.value if isinstance(x, DualScalar) else float(x)


def derivative_of(x) -> float:
    return x.derivative if isinstance(x, DualScalar) else 0.0


def sqrt(x):
    return x.sqrt() if isinstance(x, DualScalar) else math.sqrt(x)


def sin(x):
    return x.sin() if isinstance(x, DualScalar) else math.sin(x)


def cos(x):
    return x.cos() if isinstance(x, DualScalar) else math.cos(x)


def exp(x):
    return x.exp() if isinstance(x, DualScalar) else math.exp(x)


def log(x):
    return x.log() if isinstance(x, DualScalar) else math.log(x)
