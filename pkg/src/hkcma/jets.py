"""Second-order truncated Taylor arithmetic over the real chart (x1..x4).

The real chart is x1 = Re p, x2 = Im p, x3 = Re z2, x4 = Im z2.  A
:class:`TaylorScalar` carries value, gradient and Hessian of a (complex
valued) function of the chart; arithmetic propagates them exactly, so
metric components built from exact potential jets come with exact first
and second derivatives.

:class:`WirtingerSeries` is the companion truncated power series in the
four Wirtinger directions, used to compose ``-log v`` to any order.
"""
from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from .errors import SingularInputError
from .expsum import (
    ExpSumPotential,
    VJet,
    WirtingerIndex,
    as_point,
    indices_up_to,
    jet,
)

NDIM = 4
#: Division by a TaylorScalar with smaller |value| raises.
DIVISION_FLOOR = 1e-140

# row i: real-chart derivative d/dx_i expressed in (d_p, d_pbar, d_2, d_2bar)
CHAIN = np.array(
    [
        [1, 1, 0, 0],
        [1j, -1j, 0, 0],
        [0, 0, 1, 1],
        [0, 0, 1j, -1j],
    ],
    dtype=complex,
)
# row A: Wirtinger derivative d_A expressed in real-chart derivatives
WIRTINGER = np.linalg.inv(CHAIN)
_UNITS = [WirtingerIndex(*row) for row in np.eye(4, dtype=int)]


class TaylorScalar:
    """value, grad (4,), hess (4, 4) of a function at one chart point."""

    __slots__ = ("value", "grad", "hess")
    __array_priority__ = 1000  # keep numpy scalars from broadcasting over us

    def __init__(self, value, grad=None, hess=None):
        dt = np.result_type(value, complex)
        if grad is not None:
            dt = np.result_type(dt, np.asarray(grad).dtype)
        self.value = dt.type(value)
        self.grad = np.zeros(NDIM, dt) if grad is None else np.asarray(grad, dt)
        self.hess = np.zeros((NDIM, NDIM), dt) if hess is None else np.asarray(hess, dt)

    @classmethod
    def constant(cls, c) -> "TaylorScalar":
        return cls(c)

    def __repr__(self):
        return f"TaylorScalar({self.value!r}, grad={self.grad!r})"

    # -- arithmetic -------------------------------------------------------
    @staticmethod
    def _wrap(x) -> "TaylorScalar":
        return x if isinstance(x, TaylorScalar) else TaylorScalar(x)

    def __add__(self, other):
        if not isinstance(other, TaylorScalar):
            return TaylorScalar(self.value + other, self.grad, self.hess)
        return TaylorScalar(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __neg__(self):
        return TaylorScalar(-self.value, -self.grad, -self.hess)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TaylorScalar):
            c = other
            return TaylorScalar(self.value * c, self.grad * c, self.hess * c)
        a, b = self, other
        g = a.grad * b.value + a.value * b.grad
        cross = np.outer(a.grad, b.grad)
        h = a.hess * b.value + a.value * b.hess + cross + cross.T
        return TaylorScalar(a.value * b.value, g, h)

    __rmul__ = __mul__

    def reciprocal(self) -> "TaylorScalar":
        return self.compose(*_recip_derivs(self.value))

    def __truediv__(self, other):
        if not isinstance(other, TaylorScalar):
            if abs(other) < DIVISION_FLOOR:
                raise SingularInputError(f"division by {other!r}")
            return self * (1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = TaylorScalar(1.0)
        for _ in range(n):
            out = out * self
        return out

    def conjugate(self) -> "TaylorScalar":
        # real chart variables: conjugation acts on coefficients only
        return TaylorScalar(np.conj(self.value), self.grad.conj(), self.hess.conj())

    conj = conjugate

    @property
    def real(self) -> "TaylorScalar":
        return TaylorScalar(np.real(self.value), self.grad.real, self.hess.real)

    @property
    def imag(self) -> "TaylorScalar":
        return TaylorScalar(np.imag(self.value), self.grad.imag, self.hess.imag)

    def compose(self, f0, f1, f2) -> "TaylorScalar":
        """Chain rule with outer function value f0 and derivatives f1, f2 at self.value."""
        g = f1 * self.grad
        h = f1 * self.hess + f2 * np.outer(self.grad, self.grad)
        return TaylorScalar(f0, g, h)

    # -- helpers ----------------------------------------------------------
    def wirtinger_grad(self) -> np.ndarray:
        """First derivatives along (p, pbar, z2, z2bar)."""
        return WIRTINGER @ self.grad

    def max_hess_asymmetry(self) -> float:
        return float(np.abs(self.hess - self.hess.T).max())


def _recip_derivs(x: complex):
    if abs(x) < DIVISION_FLOOR:
        raise SingularInputError(f"division by TaylorScalar with value {x!r}")
    r = 1.0 / x
    return r, -r * r, 2 * r * r * r


def log_jet(a: TaylorScalar) -> TaylorScalar:
    x = a.value
    if x == 0:
        raise SingularInputError("log of a TaylorScalar with zero value")
    return a.compose(np.log(x), 1 / x, -1 / (x * x))


def exp_jet(a: TaylorScalar) -> TaylorScalar:
    e = np.exp(a.value)
    return a.compose(e, e, e)


def sqrt_jet(a: TaylorScalar) -> TaylorScalar:
    x = a.value
    if x == 0:
        raise SingularInputError("sqrt of a TaylorScalar with zero value")
    r = np.sqrt(x)
    return a.compose(r, 0.5 / r, -0.25 / (r * x))


def lift_coordinate(i: int, at) -> TaylorScalar:
    """Chart coordinate x_i (1-based) as a TaylorScalar."""
    if not 1 <= i <= NDIM:
        raise ValueError("coordinate index must be in 1..4")
    x = np.asarray(at, dtype=float)
    g = np.zeros(NDIM)
    g[i - 1] = 1.0
    return TaylorScalar(x[i - 1], g)


def lift_from_jet(vj: VJet, index) -> TaylorScalar:
    """Chart Taylor data of the Wirtinger derivative ``index`` of v."""
    k = WirtingerIndex(*index)
    if k.order + 2 > vj.order:
        raise ValueError(f"jet of order {vj.order} too short for index {k} (needs {k.order + 2})")
    w1 = np.array([vj[k + u] for u in _UNITS])
    w2 = np.array([[vj[k + u + w] for w in _UNITS] for u in _UNITS])
    grad = CHAIN @ w1
    hess = CHAIN @ w2 @ CHAIN.T
    return TaylorScalar(vj[k], grad, hess)


def lift_derivative_of_v(potential: ExpSumPotential, index, at, vj: VJet | None = None) -> TaylorScalar:
    k = WirtingerIndex(*index)
    if vj is None or vj.order < k.order + 2:
        vj = jet(potential, as_point(at), k.order + 2)
    return lift_from_jet(vj, k)


def fd_oracle(field: Callable, at, step: float = 1e-4):
    """Central-difference gradient and Hessian of ``field`` (scalar or array valued).

    Returns arrays with the derivative axes last: grad[..., i], hess[..., i, j].
    """
    x0 = np.asarray(at, dtype=float)
    f0 = np.asarray(field(x0))
    n = x0.size
    grad = np.zeros(f0.shape + (n,), dtype=np.result_type(f0, float))
    hess = np.zeros(f0.shape + (n, n), dtype=grad.dtype)
    e = np.eye(n) * step
    fp = [np.asarray(field(x0 + e[i])) for i in range(n)]
    fm = [np.asarray(field(x0 - e[i])) for i in range(n)]
    for i in range(n):
        grad[..., i] = (fp[i] - fm[i]) / (2 * step)
        hess[..., i, i] = (fp[i] - 2 * f0 + fm[i]) / step**2
    for i, j in itertools.combinations(range(n), 2):
        fpp = np.asarray(field(x0 + e[i] + e[j]))
        fpm = np.asarray(field(x0 + e[i] - e[j]))
        fmp = np.asarray(field(x0 - e[i] + e[j]))
        fmm = np.asarray(field(x0 - e[i] - e[j]))
        hess[..., i, j] = hess[..., j, i] = (fpp - fpm - fmp + fmm) / (4 * step**2)
    return grad, hess


class WirtingerSeries:
    """Truncated Taylor series in the Wirtinger directions (p, pbar, z2, z2bar).

    Coefficients are stored as derivative / multi-factorial, keyed by
    :class:`WirtingerIndex`; products drop every term beyond ``order``.
    """

    def __init__(self, coeffs: dict, order: int):
        self.order = order
        self.coeffs = {WirtingerIndex(*k): complex(c) for k, c in coeffs.items() if k_order(k) <= order}

    @classmethod
    def from_jet(cls, vj: VJet, order: int | None = None) -> "WirtingerSeries":
        order = vj.order if order is None else order
        return cls({k: vj[k] / _factorial(k) for k in indices_up_to(order)}, order)

    def derivative(self, k) -> complex:
        k = WirtingerIndex(*k)
        return self.coeffs.get(k, 0j) * _factorial(k)

    def derivatives(self) -> dict:
        return {k: self.derivative(k) for k in indices_up_to(self.order)}

    @property
    def constant(self) -> complex:
        return self.coeffs.get(WirtingerIndex(), 0j)

    def __add__(self, other):
        if not isinstance(other, WirtingerSeries):
            out = dict(self.coeffs)
            z = WirtingerIndex()
            out[z] = out.get(z, 0j) + other
            return WirtingerSeries(out, self.order)
        order = min(self.order, other.order)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0j) + c
        return WirtingerSeries(out, order)

    __radd__ = __add__

    def __neg__(self):
        return WirtingerSeries({k: -c for k, c in self.coeffs.items()}, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, WirtingerSeries):
            return WirtingerSeries({k: c * other for k, c in self.coeffs.items()}, self.order)
        order = min(self.order, other.order)
        out: dict = {}
        for ka, ca in self.coeffs.items():
            oa = ka.order
            for kb, cb in other.coeffs.items():
                if oa + kb.order <= order:
                    k = ka + kb
                    out[k] = out.get(k, 0j) + ca * cb
        return WirtingerSeries(out, order)

    __rmul__ = __mul__

    def _nilpotent_part(self):
        c0 = self.constant
        rest = dict(self.coeffs)
        rest.pop(WirtingerIndex(), None)
        return c0, WirtingerSeries(rest, self.order)

    def log(self) -> "WirtingerSeries":
        c0, rest = self._nilpotent_part()
        if c0 == 0:
            raise SingularInputError("log of a series with zero constant term")
        h = rest * (1 / c0)
        out = WirtingerSeries({WirtingerIndex(): np.log(c0)}, self.order)
        power = h
        for n in range(1, self.order + 1):
            out = out + power * ((-1) ** (n + 1) / n)
            power = power * h
        return out

    def reciprocal(self) -> "WirtingerSeries":
        c0, rest = self._nilpotent_part()
        if abs(c0) < DIVISION_FLOOR:
            raise SingularInputError("reciprocal of a series with zero constant term")
        h = rest * (1 / c0)
        out = WirtingerSeries({WirtingerIndex(): 1.0}, self.order)
        power = h
        for n in range(1, self.order + 1):
            out = out + power * (-1) ** n
            power = power * h
        return out * (1 / c0)

    def __truediv__(self, other):
        if not isinstance(other, WirtingerSeries):
            return self * (1 / other)
        return self * other.reciprocal()

    def conjugate(self) -> "WirtingerSeries":
        return WirtingerSeries({k.conj(): np.conj(c) for k, c in self.coeffs.items()}, self.order)

    def diff(self, direction) -> "WirtingerSeries":
        """Derivative along one Wirtinger direction (0..3); order drops by one."""
        d = int(direction)
        out = {}
        for k, c in self.coeffs.items():
            if k[d] > 0:
                lowered = list(k)
                lowered[d] -= 1
                out[WirtingerIndex(*lowered)] = c * k[d]
        return WirtingerSeries(out, max(self.order - 1, 0))


def k_order(k) -> int:
    return sum(k)


def _factorial(k) -> int:
    return math.prod(math.factorial(c) for c in k)
