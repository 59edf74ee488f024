"""Real exponential-sum potentials in two complex variables.

A potential is a finite sum

    v = sum_k K_k exp(lp_k p + lq_k pbar + l2_k z2 + lw_k z2bar)

where ``p``, ``z2`` are complex coordinates and ``pbar``, ``z2bar`` their
conjugates, treated as independent Wirtinger directions.  Derivatives are
closed form: each Wirtinger derivative multiplies the amplitude by the
corresponding exponent.  The term set is closed under the conjugation map

    (K, lp, lq, l2, lw) -> (conj K, conj lq, conj lp, conj lw, conj l2)

which makes ``v`` real.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DomainError, RangeError

#: Largest real part of an exponent accepted before raising ``RangeError``.
EXPONENT_LIMIT = 700.0
#: Terms with smaller amplitude modulus are dropped at construction.
AMPLITUDE_FLOOR = 1e-300
#: Relative tolerance on the imaginary residue of a real evaluation.
REALITY_TOL = 1e-12
#: Highest jet order supported by :func:`jet`.
MAX_JET_ORDER = 6


class WirtingerIndex(NamedTuple):
    """Derivative counts along (p, pbar, z2, z2bar)."""

    kp: int = 0
    kq: int = 0
    k2: int = 0
    kw: int = 0

    @property
    def order(self) -> int:
        return self.kp + self.kq + self.k2 + self.kw

    def conj(self) -> "WirtingerIndex":
        """Index of the conjugate derivative (swaps barred and unbarred)."""
        return WirtingerIndex(self.kq, self.kp, self.kw, self.k2)

    def __add__(self, other):  # componentwise, not tuple concatenation
        return WirtingerIndex(*(a + b for a, b in zip(self, other)))


# unit steps, in the order (p, pbar, z2, z2bar)
DP = WirtingerIndex(1, 0, 0, 0)
DQ = WirtingerIndex(0, 1, 0, 0)
D2 = WirtingerIndex(0, 0, 1, 0)
DW = WirtingerIndex(0, 0, 0, 1)
UNIT = (DP, DQ, D2, DW)
ZERO = WirtingerIndex()


def idx(*counts) -> WirtingerIndex:
    return WirtingerIndex(*counts)


def indices_up_to(order: int) -> list[WirtingerIndex]:
    """All indices of total order <= ``order``, sorted by order then lexically."""
    out = [
        WirtingerIndex(*k)
        for k in itertools.product(range(order + 1), repeat=4)
        if sum(k) <= order
    ]
    out.sort(key=lambda k: (k.order, tuple(-c for c in k)))
    return out


@dataclass(frozen=True)
class CoordPoint:
    """Point (p, z2); the conjugates are implied."""

    p: complex
    z2: complex

    def __post_init__(self):
        if not (np.isfinite(self.p) and np.isfinite(self.z2)):
            raise DomainError(f"non-finite coordinate point {self}")

    @classmethod
    def from_real(cls, x) -> "CoordPoint":
        x1, x2, x3, x4 = (float(t) for t in x)
        return cls(complex(x1, x2), complex(x3, x4))

    def to_real(self) -> np.ndarray:
        return np.array([self.p.real, self.p.imag, self.z2.real, self.z2.imag])

    def wirtinger_vector(self) -> np.ndarray:
        """(p, pbar, z2, z2bar) as a complex vector."""
        p, z = complex(self.p), complex(self.z2)
        return np.array([p, p.conjugate(), z, z.conjugate()])


def as_point(at) -> CoordPoint:
    if isinstance(at, CoordPoint):
        return at
    return CoordPoint.from_real(at)


@dataclass(frozen=True)
class ExpTerm:
    amplitude: complex
    lp: complex
    lq: complex
    l2: complex
    lw: complex

    def __post_init__(self):
        if not all(np.isfinite(c) for c in self.as_tuple()):
            raise DomainError(f"non-finite term {self}")

    def as_tuple(self) -> tuple:
        return (self.amplitude, self.lp, self.lq, self.l2, self.lw)

    @property
    def exponents(self) -> tuple:
        return (self.lp, self.lq, self.l2, self.lw)

    def partner(self) -> "ExpTerm":
        """The conjugate term required for a real sum."""
        c = np.conj
        return ExpTerm(
            complex(c(self.amplitude)),
            complex(c(self.lq)),
            complex(c(self.lp)),
            complex(c(self.lw)),
            complex(c(self.l2)),
        )

    def value(self, at) -> complex:
        z = as_point(at).wirtinger_vector()
        e = complex(np.dot(self.exponents, z))
        if abs(e.real) > EXPONENT_LIMIT:
            raise RangeError(f"exponent real part {e.real:.3g} out of range for {self}")
        return self.amplitude * np.exp(e)


class ExpSumPotential:
    """Immutable sum of :class:`ExpTerm`; equal exponent vectors are merged."""

    __slots__ = ("_terms", "_amp", "_exp")

    def __init__(self, terms: Iterable[ExpTerm] = ()):
        merged: dict[tuple, complex] = {}
        for t in terms:
            key = tuple(complex(e) for e in t.exponents)
            merged[key] = merged.get(key, 0j) + complex(t.amplitude)
        kept = [
            ExpTerm(amp, *key) for key, amp in merged.items() if abs(amp) >= AMPLITUDE_FLOOR
        ]
        self._terms = tuple(kept)
        self._amp = np.array([t.amplitude for t in kept], dtype=complex)
        self._exp = np.array([t.exponents for t in kept], dtype=complex).reshape(-1, 4)

    @property
    def terms(self) -> tuple[ExpTerm, ...]:
        return self._terms

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amp.copy()

    @property
    def exponent_matrix(self) -> np.ndarray:
        """(n_terms, 4) complex exponents in the order (p, pbar, z2, z2bar)."""
        return self._exp.copy()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __add__(self, other: "ExpSumPotential") -> "ExpSumPotential":
        return ExpSumPotential(self._terms + other._terms)

    def scaled(self, factor: float) -> "ExpSumPotential":
        return ExpSumPotential(
            ExpTerm(factor * t.amplitude, *t.exponents) for t in self._terms
        )

    def __repr__(self):
        return f"ExpSumPotential({len(self._terms)} terms)"

    def _exponentials(self, at, dtype=complex) -> np.ndarray:
        """amplitude * exp(linear form) for every term, with overflow guard."""
        if not self._terms:
            return np.zeros(0, dtype=dtype)
        z = as_point(at).wirtinger_vector().astype(dtype)
        e = self._exp.astype(dtype) @ z
        bad = np.flatnonzero(np.abs(e.real) > EXPONENT_LIMIT)
        if bad.size:
            k = int(bad[0])
            raise RangeError(
                f"exponent real part {e[k].real:.4g} exceeds +-{EXPONENT_LIMIT} "
                f"for term #{k} {self._terms[k]}"
            )
        return self._amp.astype(dtype) * np.exp(e)


def _real_part(total: complex, scale: float, what: str) -> float:
    if abs(total.imag) > REALITY_TOL * scale + 1e-300:
        raise DomainError(
            f"{what}: imaginary residue {total.imag:.3g} exceeds {REALITY_TOL} x {scale:.3g}; "
            "is the potential conjugation-closed?"
        )
    return float(total.real)


def evaluate(potential: ExpSumPotential, point) -> float:
    """Value of the real potential at ``point``."""
    w = potential._exponentials(point)
    if w.size == 0:
        return 0.0
    return _real_part(complex(w.sum()), float(np.abs(w).sum()), "evaluate")


def values(potential: ExpSumPotential, points: np.ndarray) -> np.ndarray:
    """Vectorised evaluation at real-chart points of shape (n, 4)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(potential) == 0:
        return np.zeros(len(pts))
    z = np.stack(
        [pts[:, 0] + 1j * pts[:, 1], pts[:, 0] - 1j * pts[:, 1],
         pts[:, 2] + 1j * pts[:, 3], pts[:, 2] - 1j * pts[:, 3]],
        axis=1,
    )
    e = z @ potential._exp.T
    if np.any(np.abs(e.real) > EXPONENT_LIMIT):
        i, k = np.argwhere(np.abs(e.real) > EXPONENT_LIMIT)[0]
        raise RangeError(f"exponent out of range for term #{k} at point {pts[i]}")
    w = np.exp(e) * potential._amp
    total = w.sum(axis=1)
    scale = np.abs(w).sum(axis=1)
    if np.any(np.abs(total.imag) > REALITY_TOL * scale + 1e-300):
        raise DomainError("values: imaginary residue too large; potential not conjugation-closed")
    return total.real


def _monomials(potential: ExpSumPotential, index, dtype=complex) -> np.ndarray:
    L = potential._exp.astype(dtype)
    kp, kq, k2, kw = index
    return L[:, 0] ** kp * L[:, 1] ** kq * L[:, 2] ** k2 * L[:, 3] ** kw


def derivative(potential: ExpSumPotential, index, point) -> complex:
    """Exact Wirtinger derivative of ``v`` with counts ``index`` at ``point``."""
    index = WirtingerIndex(*index)
    if min(index) < 0:
        raise ValueError(f"negative derivative count in {index}")
    w = potential._exponentials(point)
    if w.size == 0:
        return 0j
    return complex(np.dot(_monomials(potential, index), w))


@dataclass(frozen=True)
class VJet:
    """All Wirtinger derivatives of a potential at one point up to ``order``."""

    point: CoordPoint
    order: int
    table: dict = field(repr=False)

    def __getitem__(self, index) -> complex:
        return self.table[WirtingerIndex(*index)]

    def get(self, *counts) -> complex:
        return self.table[WirtingerIndex(*counts)]

    def max_reality_defect(self) -> float:
        """Largest |f_k - conj f_{conj k}| relative to |f_k|."""
        worst = 0.0
        for k, val in self.table.items():
            other = self.table[k.conj()]
            worst = max(worst, abs(val - np.conj(other)) / max(abs(val), 1e-300))
        return worst


def jet(potential: ExpSumPotential, point, order: int, dtype=complex) -> VJet:
    """Table of every derivative of total order <= ``order``.

    ``dtype=np.clongdouble`` evaluates the sums in extended precision; the
    exponents themselves are the stored double values.
    """
    if order < 0 or order > MAX_JET_ORDER:
        raise ValueError(f"jet order {order} outside 0..{MAX_JET_ORDER}")
    at = as_point(point)
    w = potential._exponentials(at, dtype)
    zero = np.dtype(dtype).type(0)
    table = {}
    for k in indices_up_to(order):
        table[k] = np.dot(_monomials(potential, k, dtype), w) if w.size else zero
        if dtype is complex:
            table[k] = complex(table[k])
    return VJet(at, order, table)


@dataclass
class ConjugationReport:
    passed: bool
    unpaired: list
    mismatched: list

    def __bool__(self):
        return self.passed


def conjugation_check(potential: ExpSumPotential, rtol: float = 1e-12) -> ConjugationReport:
    """Check every term has its conjugate partner with matching amplitude.

    Terms whose exponents agree within ``rtol`` are compared as a cluster,
    so that nearly coincident exponents from distinct modes still pair up.
    """
    terms = potential.terms
    E = potential._exp
    A = potential._amp
    unpaired, mismatched = [], []
    for t in terms:
        own = np.array(t.exponents)
        target = np.array(t.partner().exponents)
        scale = max(1.0, float(np.abs(target).max()))
        hits = np.abs(E - target).max(axis=1) <= rtol * scale
        if not hits.any():
            unpaired.append(t)
            continue
        near = np.abs(E - own).max(axis=1) <= rtol * scale
        total, mine = A[hits].sum(), np.conj(A[near].sum())
        size = max(1.0, float(np.abs(A[hits]).sum() + np.abs(A[near]).sum()))
        if abs(total - mine) > rtol * size:
            mismatched.append(t)
    return ConjugationReport(not unpaired and not mismatched, unpaired, mismatched)
