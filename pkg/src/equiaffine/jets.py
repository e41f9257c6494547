"""Truncated bivariate Taylor jets.

A :class:`Jet` of order ``n`` carries the Taylor polynomial of a function of
``(u, v)`` up to total degree ``n`` at a fixed base point.  Coefficients are
stored *normalized*: slot ``(a, b)`` holds

    c_ab = (1 / (a! b!)) * d^(a+b) f / du^a dv^b

so that multiplication is a plain truncated convolution.  Use
:meth:`Jet.derivative` to read raw partial derivatives; nothing outside this
module should touch the normalized slots directly.

Jets are array valued: ``coeffs`` has shape ``(ncoef, *shape)``, so a single
jet can stand for a vector or matrix of functions.  Scalar jets are the
``shape == ()`` case.  Binary operations broadcast over ``shape`` exactly like
numpy arrays do, and combine jets of different order by truncating to the
smaller one.

Slot ordering is by total degree, then by decreasing power of ``u``::

    (0,0) (1,0) (0,1) (2,0) (1,1) (0,2) (3,0) ...

which makes the index of ``(a, b)`` independent of the jet order, and
truncation a prefix slice.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

# Single point of change for the coefficient scalar type.
DTYPE = np.float64

# |constant term| below this is treated as a pole for division and log.
POLE_THRESHOLD = 1e-300


class JetError(ArithmeticError):
    pass


class DivisionByZeroJet(JetError, ZeroDivisionError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"division by a jet with constant term {value!r}")


class DomainError(JetError, ValueError):
    def __init__(self, fn: str, value, component: int | None = None):
        self.fn = fn
        self.value = value
        self.component = component
        where = f" in component x{component}" if component is not None else ""
        super().__init__(f"{fn} undefined at {value!r}{where}")


def ncoef(order: int) -> int:
    return (order + 1) * (order + 2) // 2


def slot(a: int, b: int) -> int:
    d = a + b
    return d * (d + 1) // 2 + b


@lru_cache(maxsize=None)
def monomials(order: int) -> tuple[tuple[int, int], ...]:
    return tuple((d - b, b) for d in range(order + 1) for b in range(d + 1))


@lru_cache(maxsize=None)
def _product_table(order: int):
    """Index arrays (I, J) and a summation matrix S with out = S @ (a[I] * b[J])."""
    mons = monomials(order)
    left, right, target = [], [], []
    for k, (a, b) in enumerate(mons):
        for a1 in range(a + 1):
            for b1 in range(b + 1):
                left.append(slot(a1, b1))
                right.append(slot(a - a1, b - b1))
                target.append(k)
    summer = np.zeros((len(mons), len(target)), dtype=DTYPE)
    summer[target, np.arange(len(target))] = 1.0
    return np.array(left), np.array(right), summer


@lru_cache(maxsize=None)
def _derivative_table(order: int, axis: int):
    """Source slots and multipliers for d/du (axis 0) or d/dv (axis 1)."""
    src, mult = [], []
    for a, b in monomials(order - 1):
        if axis == 0:
            src.append(slot(a + 1, b))
            mult.append(a + 1)
        else:
            src.append(slot(a, b + 1))
            mult.append(b + 1)
    return np.array(src), np.array(mult, dtype=DTYPE)


class Jet:
    """Order-``order`` Taylor jet with array-valued coefficients."""

    __slots__ = ("order", "coeffs")
    __array_priority__ = 1000  # make ndarray <op> Jet defer to Jet

    def __init__(self, coeffs, order: int):
        coeffs = np.asarray(coeffs, dtype=DTYPE)
        if order < 0:
            raise ValueError("jet order must be non-negative")
        if coeffs.shape[0] != ncoef(order):
            raise ValueError(
                f"order {order} needs {ncoef(order)} coefficients, got {coeffs.shape[0]}"
            )
        self.order = order
        self.coeffs = coeffs

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        value = np.asarray(value, dtype=DTYPE)
        coeffs = np.zeros((ncoef(order),) + value.shape, dtype=DTYPE)
        coeffs[0] = value
        return cls(coeffs, order)

    @classmethod
    def from_derivatives(cls, derivs: dict[tuple[int, int], float], order: int) -> "Jet":
        """Build a scalar jet from raw partial derivatives ``{(a, b): value}``."""
        coeffs = np.zeros(ncoef(order), dtype=DTYPE)
        for (a, b), value in derivs.items():
            if a + b <= order:
                coeffs[slot(a, b)] = value / (math.factorial(a) * math.factorial(b))
        return cls(coeffs, order)

    # -- inspection -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def value(self) -> np.ndarray:
        v = self.coeffs[0]
        return v.copy() if v.ndim else DTYPE(v)

    def derivative(self, a: int, b: int):
        """Raw partial derivative d^(a+b)/du^a dv^b at the base point."""
        if a < 0 or b < 0 or a + b > self.order:
            raise ValueError(f"derivative ({a},{b}) outside order {self.order}")
        out = self.coeffs[slot(a, b)] * (math.factorial(a) * math.factorial(b))
        return out if np.ndim(out) else float(out)

    def gradient(self) -> np.ndarray:
        """First partials stacked on a trailing axis: shape ``(*shape, 2)``."""
        return np.stack([self.coeffs[1], self.coeffs[2]], axis=-1)

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, shape={self.shape}, value={self.coeffs[0]!r})"

    # -- structural -------------------------------------------------------

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.coeffs[: ncoef(order)], order)

    def d(self, axis: int) -> "Jet":
        """Partial derivative jet along u (axis 0) or v (axis 1); order drops by one."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, mult = _derivative_table(self.order, axis)
        mult = mult.reshape((-1,) + (1,) * len(self.shape))
        return Jet(self.coeffs[src] * mult, self.order - 1)

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.coeffs[(slice(None),) + key], self.order)

    def __len__(self) -> int:
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(len(self.shape)))
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a + 1 if a >= 0 else a for a in axes)
        return Jet(self.coeffs.sum(axis=axes), self.order)

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.coeffs.reshape((self.coeffs.shape[0],) + tuple(shape)), self.order)

    def swapaxes(self, a: int, b: int) -> "Jet":
        a = a + 1 if a >= 0 else a
        b = b + 1 if b >= 0 else b
        return Jet(np.swapaxes(self.coeffs, a, b), self.order)

    @property
    def T(self) -> "Jet":
        return self.swapaxes(-1, -2)

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            order = min(self.order, other.order)
            a, b = self.truncate(order), other.truncate(order)
        else:
            a, b = self, Jet.constant(other, self.order)
        ndim = max(len(a.shape), len(b.shape))
        return _lift(a, ndim), _lift(b, ndim)

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a.coeffs + b.coeffs, a.order)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.coeffs - b.coeffs, a.order)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return Jet(b.coeffs - a.coeffs, a.order)

    def __neg__(self):
        return Jet(-self.coeffs, self.order)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=DTYPE)
            return Jet(_lift(self, other.ndim).coeffs * other, self.order)
        a, b = self._coerce(other)
        left, right, summer = _product_table(a.order)
        prod = a.coeffs[left] * b.coeffs[right]
        return Jet(np.tensordot(summer, prod, axes=1), a.order)

    __rmul__ = __mul__

    def __matmul__(self, other):
        a, b = self._coerce(other)
        left, right, summer = _product_table(a.order)
        prod = np.matmul(a.coeffs[left], b.coeffs[right])
        return Jet(np.tensordot(summer, prod, axes=1), a.order)

    def __rmatmul__(self, other):
        b, a = self._coerce(other)
        return a @ b

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=DTYPE)
            if np.any(np.abs(other) < POLE_THRESHOLD):
                raise DivisionByZeroJet(other)
            return Jet(_lift(self, other.ndim).coeffs / other, self.order)
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)):
            return int_power(self, int(p))
        return pow_const(self, p)


# -- helpers on jets ---------------------------------------------------------


def _lift(x: Jet, ndim: int) -> Jet:
    """Insert leading value axes so ``x`` has at least ``ndim`` value dimensions."""
    missing = ndim - len(x.shape)
    if missing <= 0:
        return x
    c = x.coeffs
    return Jet(c.reshape((c.shape[0],) + (1,) * missing + c.shape[1:]), x.order)


def jet_variable(which: str, value: float, order: int) -> Jet:
    """Jet of the coordinate function ``u`` or ``v`` at ``value``."""
    if order < 1:
        raise ValueError("jet_variable needs order >= 1")
    coeffs = np.zeros(ncoef(order), dtype=DTYPE)
    coeffs[0] = value
    if which == "u":
        coeffs[slot(1, 0)] = 1.0
    elif which == "v":
        coeffs[slot(0, 1)] = 1.0
    else:
        raise ValueError(f"unknown coordinate {which!r}")
    return Jet(coeffs, order)


def stack(jets, axis: int = 0) -> Jet:
    jets = list(jets)
    order = min(j.order for j in jets)
    axis = axis + 1 if axis >= 0 else axis
    return Jet(np.stack([j.truncate(order).coeffs for j in jets], axis=axis), order)


def _nilpotent(x: Jet) -> Jet:
    coeffs = x.coeffs.copy()
    coeffs[0] = 0.0
    return Jet(coeffs, x.order)


def compose(x: Jet, taylor: list[np.ndarray]) -> Jet:
    """Evaluate ``sum_n taylor[n] * (x - x0)^n`` with ``taylor[n] = f^(n)(x0)/n!``."""
    dx = _nilpotent(x)
    out = Jet.constant(taylor[0], x.order)
    power = None
    for n in range(1, x.order + 1):
        power = dx if power is None else power * dx
        out = out + power * taylor[n]
    return out


def reciprocal(x: Jet) -> Jet:
    x0 = x.coeffs[0]
    if np.any(np.abs(x0) < POLE_THRESHOLD):
        raise DivisionByZeroJet(x0)
    inv = 1.0 / x0
    taylor = [inv]
    for _ in range(x.order):
        taylor.append(-taylor[-1] * inv)
    return compose(x, taylor)


def int_power(x: Jet, p: int) -> Jet:
    if p < 0:
        return reciprocal(int_power(x, -p))
    out = Jet.constant(np.ones(x.shape), x.order)
    base = x
    while p:
        if p & 1:
            out = out * base
        p >>= 1
        if p:
            base = base * base
    return out


def pow_const(x: Jet, p: float) -> Jet:
    """x**p for a real constant p; non-integer p needs a positive base."""
    if float(p).is_integer():
        return int_power(x, int(p))
    x0 = x.coeffs[0]
    if np.any(x0 <= 0):
        raise DomainError(f"pow_const({p})", x0 if np.ndim(x0) == 0 else x0.min())
    taylor = []
    falling = 1.0
    for n in range(x.order + 1):
        taylor.append(falling * x0 ** (p - n) / math.factorial(n))
        falling *= p - n
    return compose(x, taylor)


def _periodic_taylor(values: list[np.ndarray], order: int) -> list[np.ndarray]:
    return [values[n % len(values)] / math.factorial(n) for n in range(order + 1)]


def sin(x: Jet) -> Jet:
    s, c = np.sin(x.coeffs[0]), np.cos(x.coeffs[0])
    return compose(x, _periodic_taylor([s, c, -s, -c], x.order))


def cos(x: Jet) -> Jet:
    s, c = np.sin(x.coeffs[0]), np.cos(x.coeffs[0])
    return compose(x, _periodic_taylor([c, -s, -c, s], x.order))


def sinh(x: Jet) -> Jet:
    s, c = np.sinh(x.coeffs[0]), np.cosh(x.coeffs[0])
    return compose(x, _periodic_taylor([s, c], x.order))


def cosh(x: Jet) -> Jet:
    s, c = np.sinh(x.coeffs[0]), np.cosh(x.coeffs[0])
    return compose(x, _periodic_taylor([c, s], x.order))


def exp(x: Jet) -> Jet:
    e = np.exp(x.coeffs[0])
    return compose(x, _periodic_taylor([e], x.order))


def log(x: Jet) -> Jet:
    x0 = x.coeffs[0]
    if np.any(x0 <= POLE_THRESHOLD):
        raise DomainError("log", x0 if np.ndim(x0) == 0 else x0.min())
    taylor = [np.log(x0)]
    for n in range(1, x.order + 1):
        taylor.append((-1) ** (n - 1) / (n * x0**n))
    return compose(x, taylor)


def sqrt(x: Jet) -> Jet:
    x0 = x.coeffs[0]
    if np.any(x0 <= 0):
        raise DomainError("sqrt", x0 if np.ndim(x0) == 0 else x0.min())
    return pow_const(x, 0.5)


ELEMENTARY = {
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "log": log,
    "sinh": sinh,
    "cosh": cosh,
    "sqrt": sqrt,
}


def jet_elementary(fn: str, a: Jet, p: float | None = None) -> Jet:
    """Apply a named elementary function; ``pow_const`` takes the exponent ``p``."""
    if fn == "pow_const":
        if p is None:
            raise ValueError("pow_const needs an exponent")
        return pow_const(a, p)
    try:
        f = ELEMENTARY[fn]
    except KeyError:
        raise ValueError(f"unsupported elementary function {fn!r}") from None
    return f(a)


def jet_arith(op: str, a: Jet, b: Jet | None = None) -> Jet:
    if op == "neg":
        return -a
    if b is None:
        raise ValueError(f"{op} needs two operands")
    if isinstance(b, Jet) and a.order != b.order:
        raise ValueError(f"order mismatch: {a.order} vs {b.order}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


# -- linear algebra on matrix-valued jets -------------------------------------


def inv(m: Jet) -> Jet:
    """Inverse of a square-matrix jet via the Neumann series of its nilpotent part."""
    m0inv = np.linalg.inv(m.coeffs[0])
    step = -(Jet.constant(m0inv, m.order) @ _nilpotent(m))
    out = Jet.constant(m0inv, m.order)
    term = out
    for _ in range(m.order):
        term = step @ term
        out = out + term
    return out


def solve(m: Jet, rhs) -> Jet:
    """Solve ``m @ x = rhs`` for a vector (or matrix) right-hand side."""
    if not isinstance(rhs, Jet):
        rhs = Jet.constant(rhs, m.order)
    if len(rhs.shape) == len(m.shape) - 1:
        return (inv(m) @ rhs[..., None])[..., 0]
    return inv(m) @ rhs


def det2(m: Jet) -> Jet:
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
