"""Discrete-spectrum solutions of the constant-coefficient linear system.

Each mode (alpha, F, G) contributes

    exp{2 Im([alpha^2 (s^2+1) + 1] z2)} *
      ( exp[ 2s Re w] Re{F exp[2i(Im w - 2s Re(alpha^2 z2))]}
      + exp[-2s Re w] Re{G exp[2i(Im w + 2s Re(alpha^2 z2))]} )

with w = alpha (p + nu z2) and s = sqrt(1 - 1/|alpha|^2).  Writing
Re u = (u + conj u)/2 turns every mode into at most four exponential terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .expsum import ExpSumPotential, ExpTerm


@dataclass(frozen=True)
class Mode:
    alpha: complex
    F: complex = 0j
    G: complex = 0j

    def __post_init__(self):
        for name in ("alpha", "F", "G"):
            if not np.isfinite(complex(getattr(self, name))):
                raise DomainError(f"mode {name} is not finite")
        mode_s(self.alpha)


@dataclass(frozen=True)
class SpectrumData:
    """Real drift ``nu`` and a non-empty list of modes (equal alphas merged)."""

    nu: float
    modes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not np.isfinite(self.nu):
            raise DomainError("nu must be finite")
        if not self.modes:
            raise DomainError("spectrum needs at least one mode")
        merged: dict[complex, list] = {}
        for m in self.modes:
            a = complex(m.alpha)
            if a in merged:
                merged[a][0] += complex(m.F)
                merged[a][1] += complex(m.G)
            else:
                merged[a] = [complex(m.F), complex(m.G)]
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(
            self, "modes", tuple(Mode(a, f, g) for a, (f, g) in merged.items())
        )


@dataclass(frozen=True)
class SingularFamily:
    """One-term solution that also satisfies the first-order singularity condition.

    Derived quantities (not stored): lambda = -alpha/conj(alpha),
    mu = nu - 2i alpha s, xi = p + mu z2, eta = lambda xi + conj(xi).
    """

    alpha: complex
    F: complex
    nu: float

    def __post_init__(self):
        mode_s(self.alpha)

    @property
    def lam(self) -> complex:
        a = complex(self.alpha)
        return -a / a.conjugate()

    @property
    def mu(self) -> complex:
        return self.nu - 2j * complex(self.alpha) * mode_s(self.alpha)


def mode_s(alpha: complex) -> float:
    """s = sqrt(1 - 1/|alpha|^2); real only for |alpha| >= 1."""
    r = abs(complex(alpha))
    if r < 1.0:
        raise DomainError(f"|alpha| = {r:.6g} < 1 gives imaginary s (unsupported)")
    return math.sqrt(1.0 - 1.0 / (r * r))


def mode_terms(alpha: complex, F: complex, G: complex, nu: float) -> list[ExpTerm]:
    """The (up to) four exponential terms of one mode, conjugate partners included."""
    a = complex(alpha)
    ab = a.conjugate()
    s = mode_s(a)
    out = []
    if F != 0:
        t = ExpTerm(
            complex(F) / 2,
            a * (s + 1),
            ab * (s - 1),
            -1j * (a * a * (s + 1) ** 2 + 1 + 1j * nu * a * (s + 1)),
            1j * (ab * ab * (s - 1) ** 2 + 1 - 1j * nu * ab * (s - 1)),
        )
        out += [t, t.partner()]
    if G != 0:
        t = ExpTerm(
            complex(G) / 2,
            a * (1 - s),
            -ab * (1 + s),
            -1j * (a * a * (1 - s) ** 2 + 1 + 1j * nu * a * (1 - s)),
            1j * (ab * ab * (1 + s) ** 2 + 1 + 1j * nu * ab * (1 + s)),
        )
        out += [t, t.partner()]
    return out


def expand(spec: SpectrumData) -> ExpSumPotential:
    terms = []
    for m in spec.modes:
        terms += mode_terms(m.alpha, m.F, m.G, spec.nu)
    return ExpSumPotential(terms)


def singular_family(fam: SingularFamily) -> ExpSumPotential:
    return ExpSumPotential(mode_terms(fam.alpha, fam.F, 0j, fam.nu))


def term_residuals(term: ExpTerm, nu: float) -> tuple:
    """Residuals (E1, E2, E3, E4, E2c, E3c) of the linear system on one exponential.

    E1: v_ppbar + v; E2: v_pp + v - i(v_2 - nu v_p);
    E3: v_p2bar + nu v - i(v_p - v_pbar);
    E4: v_22bar + nu^2 v - i[v_2 - v_2bar + nu (v_p - v_pbar)];
    E2c, E3c: conjugate equations.  Amplitude factored out.
    """
    lp, lq, l2, lw = (complex(e) for e in term.exponents)
    return (
        lp * lq + 1,
        lp * lp + 1 - 1j * (l2 - nu * lp),
        lp * lw + nu - 1j * (lp - lq),
        l2 * lw + nu * nu - 1j * (l2 - lw + nu * (lp - lq)),
        lq * lq + 1 + 1j * (lw - nu * lq),
        lq * l2 + nu + 1j * (lq - lp),
    )


RESIDUAL_NAMES = ("E1", "E2", "E3", "E4", "E2c", "E3c")


@dataclass
class SolutionReport:
    passed: bool
    worst_residual: float
    worst_term: ExpTerm | None
    worst_equation: str | None

    def __bool__(self):
        return self.passed


def is_solution(potential: ExpSumPotential, nu: float, tol: float = 1e-10) -> SolutionReport:
    worst, worst_t, worst_eq = 0.0, None, None
    for t in potential.terms:
        for name, r in zip(RESIDUAL_NAMES, term_residuals(t, nu)):
            if abs(r) > worst or worst_t is None:
                worst, worst_t, worst_eq = abs(r), t, name
    return SolutionReport(worst <= tol, worst, worst_t, worst_eq)
