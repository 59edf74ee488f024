"""Metric data built from jets of the potential v.

Conventions
-----------
* Real chart (x1, x2, x3, x4) = (Re p, Im p, Re z2, Im z2), orientation
  dx1^dx2^dx3^dx4 before calibration.
* Symmetric products of 1-forms in the line element are unnormalised,
  ``x y = x (x) y + y (x) x``, so that the closed-form line element and the
  null coframe reconstruction ``l lbar + lbar l + m mbar + mbar m`` agree.
* The Kaehler form built from ``l ^ lbar - m ^ mbar`` is imaginary; it is
  stored multiplied by ``-i`` so all three forms are real.

Most functions here are written against duck-typed numbers so the same
formula serves plain complex values and :class:`~hkcma.jets.TaylorScalar`
jets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NearLocusError, SingularInputError
from .expsum import (
    D2,
    DP,
    DQ,
    DW,
    ZERO,
    ExpSumPotential,
    VJet,
    WirtingerIndex,
    as_point,
    indices_up_to,
    jet,
)
from .jets import CHAIN, TaylorScalar, WirtingerSeries, lift_from_jet, sqrt_jet

#: Working precision for the metric and coframe jets that feed curvature.  The
#: chart metric is strongly anisotropic near the singular locus, and the
#: Riemann tensor loses many digits to cancellation there.
JET_DTYPE = np.clongdouble

#: Points with |c^2 - |a|^2| below this fraction of c^2 are treated as on the locus.
NEAR_LOCUS_REL = 1e-8

# NP pairing of the coframe (l, lbar, m, mbar)
NP_PAIRING = np.array(
    [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=float
)


def _conj(x):
    return x.conjugate()


def _re(x):
    return x.real


def _im(x):
    return x.imag


def _sqrt(x):
    if isinstance(x, TaylorScalar):
        return sqrt_jet(x)
    return np.sqrt(x + 0j)


# ---------------------------------------------------------------------------
# symmetry characteristics and partner coefficients
# ---------------------------------------------------------------------------


def phi_derivs(nu: float) -> dict:
    """First derivatives of the translational characteristic p + pbar + nu (z2 + z2bar).

    All higher derivatives vanish identically.
    """
    return {DP: 1.0 + 0j, DQ: 1.0 + 0j, D2: complex(nu), DW: complex(nu)}


def psi_series(potential: ExpSumPotential, at, order: int) -> WirtingerSeries:
    vj = jet(potential, as_point(at), order)
    v = vj[ZERO].real
    if not v > 0:
        raise DomainError(f"v = {v:.6g} <= 0: outside positivity domain of psi = -log v")
    return -WirtingerSeries.from_jet(vj).log()


def psi_jet(potential: ExpSumPotential, at, order: int) -> dict:
    """Wirtinger derivatives of psi = -log v up to ``order``."""
    return psi_series(potential, at, order).derivatives()


@dataclass(frozen=True)
class PartnerCoeffs:
    A: complex
    B: float
    C: complex
    B_direct: complex
    B_identity: float

    @property
    def identity_defect(self) -> float:
        """|B - (|A|^2 + |C|^2 - 1)|."""
        return abs(self.B_direct - self.B_identity)


def partner_raw(phi1, psi1):
    """(A, B, C) from first derivatives of phi and psi; generic in the number type."""
    fp, fq, f2, fw = phi1[DP], phi1[DQ], phi1[D2], phi1[DW]
    sp, sq, s2, sw = psi1[DP], psi1[DQ], psi1[D2], psi1[DW]
    den = fp * fq + sp * sq
    if not isinstance(den, TaylorScalar) and abs(den) == 0:
        raise SingularInputError("phi_p phi_pbar + psi_p psi_pbar vanishes")
    A = (fp * fp + sp * sp + 1j * (fp * s2 - f2 * sp)) / den
    C = (fp * fw + sp * sw + 1j * (fq * sp - fp * sq)) / den
    B = (f2 * fw + s2 * sw + 1j * (sp * fw - fp * sw + s2 * fq - f2 * sq)) / den
    return A, B, C


def partner_coeffs(phi1, psi1) -> PartnerCoeffs:
    A, B, C = partner_raw(phi1, psi1)
    A, B, C = complex(A), complex(B), complex(C)
    ident = abs(A) ** 2 + abs(C) ** 2 - 1
    return PartnerCoeffs(A, B.real, C, B, ident)


# ---------------------------------------------------------------------------
# metric coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricABC:
    a: complex
    b: complex
    c: float


def abc_raw(vj, nu):
    v, vp, vq, v2 = vj[ZERO], vj[DP], vj[DQ], vj[D2]
    a = v * v + vp * vp - 1j * v * (v2 - nu * vp)
    b = vq * v2 + nu * v * v - 1j * v * (vp - vq)
    c = v * v + vp * vq
    return a, b, c


def abc(vj, nu: float) -> MetricABC:
    a, b, c = abc_raw(vj, nu)
    return MetricABC(complex(a), complex(b), float(complex(c).real))


def singular_locus_value(vj, nu: float) -> float:
    """c^2 - |a|^2; zero exactly on the curvature-singular locus."""
    m = abc(vj, nu)
    return m.c * m.c - abs(m.a) ** 2


def singularity_residual(vj, nu: float) -> float:
    """First-order singularity functional in v and its first derivatives."""
    v, vp, vq, v2 = (complex(vj[k]) for k in (ZERO, DP, DQ, D2))
    v = v.real
    w = v2 - nu * vp
    out = v * ((vp - vq) ** 2 + abs(w) ** 2) + 2 * (w * (v * v + vq * vq)).imag
    return float(complex(out).real)


def singularity_scale(vj, nu: float) -> float:
    """Sum of magnitudes of the products entering :func:`singularity_residual`."""
    v, vp, vq, v2 = (complex(vj[k]) for k in (ZERO, DP, DQ, D2))
    w = v2 - nu * vp
    return abs(v) * (abs(vp - vq) ** 2 + abs(w) ** 2) + 2 * abs(w) * (abs(v) ** 2 + abs(vq) ** 2)


def legendre_existence_residual(psi2) -> float:
    """psi_pp psi_pbarpbar - psi_ppbar^2; zero where the Legendre map degenerates."""
    val = psi2[WirtingerIndex(2, 0, 0, 0)] * psi2[WirtingerIndex(0, 2, 0, 0)] - psi2[WirtingerIndex(1, 1, 0, 0)] ** 2
    return float(complex(val).real)


# ---------------------------------------------------------------------------
# metric and coframe
# ---------------------------------------------------------------------------


def _locus_guard(v, c, D, near_locus_rel):
    if not v > 0:
        raise DomainError(f"v = {v:.6g} <= 0: outside positivity domain")
    if abs(D) < near_locus_rel * c * c:
        raise NearLocusError(
            f"near singular locus: c^2 - |a|^2 = {D:.6g} (c^2 = {c * c:.6g})", locus_value=D
        )


def metric_components(vj, nu):
    """Real-chart metric as a 4x4 nested list of generic numbers."""
    a, b, c = abc_raw(vj, nu)
    v = vj[ZERO]
    aa = _re(a * _conj(a))
    D = c * c - aa
    Z = [c, 1j * c, b, 1j * b]
    E = [0, 0, 1, 1j]
    k_zz = 1 / (v * v * D)
    k_mix = 2 * (c * c + aa) / c
    k_ee = 2 * D / (v * v * c)
    g = [[None] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(i, 4):
            entry = k_zz * (4 * _re(a * Z[i] * Z[j]) + k_mix * _re(Z[i] * _conj(Z[j])))
            if E[i] != 0 and E[j] != 0:
                ee = (E[i] * np.conj(E[j])).real
                if ee != 0:
                    entry = entry + k_ee * ee
            g[i][j] = g[j][i] = entry
    return g


@dataclass(frozen=True)
class RealMetric4:
    matrix: np.ndarray
    locus_value: float

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class MetricJet:
    """Metric with exact first and second chart derivatives.

    g[i, j], dg[i, j, k] = d_k g_ij, ddg[i, j, k, l] = d_k d_l g_ij.
    """

    g: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray

    @property
    def dim(self) -> int:
        return self.g.shape[0]


def metric_at(potential: ExpSumPotential, nu: float, at, near_locus_rel: float = NEAR_LOCUS_REL) -> RealMetric4:
    vj = jet(potential, as_point(at), 1)
    m = abc(vj, nu)
    D = m.c * m.c - abs(m.a) ** 2
    _locus_guard(vj[ZERO].real, m.c, D, near_locus_rel)
    g = metric_components(vj, nu)
    return RealMetric4(np.array([[float(np.real(x)) for x in row] for row in g]), D)


def taylor_jet_table(vj: VJet, max_index_order: int = 1) -> dict:
    """TaylorScalar lifts of every derivative of v up to ``max_index_order``."""
    return {k: lift_from_jet(vj, k) for k in indices_up_to(max_index_order)}


def metric_jet(potential: ExpSumPotential, nu: float, at, near_locus_rel: float = NEAR_LOCUS_REL,
               extended: bool = False) -> MetricJet:
    """Metric with exact chart derivatives; ``extended`` keeps long-double arrays."""
    vj = jet(potential, as_point(at), 3, dtype=JET_DTYPE)
    m = abc(vj, nu)
    D = m.c * m.c - abs(m.a) ** 2
    _locus_guard(vj[ZERO].real, m.c, D, near_locus_rel)
    g = metric_components(taylor_jet_table(vj), nu)
    return metric_jet_from_taylor(g, np.longdouble if extended else float)


def metric_jet_from_taylor(g, dtype=float) -> MetricJet:
    n = len(g)
    G = np.empty((n, n), dtype=dtype)
    dG = np.empty((n, n, n), dtype=dtype)
    ddG = np.empty((n, n, n, n), dtype=dtype)
    for i in range(n):
        for j in range(n):
            t = g[i][j]
            G[i, j] = np.real(t.value)
            dG[i, j] = t.grad.real
            ddG[i, j] = t.hess.real
    return MetricJet(G, dG, ddG)


@dataclass(frozen=True)
class Coframe:
    """Null coframe components over (dp, dpbar, dz2, dz2bar)."""

    l: np.ndarray
    m: np.ndarray

    @property
    def l_real(self) -> np.ndarray:
        """Components over (dx1..dx4)."""
        return CHAIN @ self.l

    @property
    def m_real(self) -> np.ndarray:
        return CHAIN @ self.m

    def basis_matrix(self) -> np.ndarray:
        """Rows l, lbar, m, mbar in real-chart components."""
        l, m = self.l_real, self.m_real
        return np.array([l, l.conj(), m, m.conj()])

    def metric(self) -> np.ndarray:
        """l lbar + lbar l + m mbar + mbar m in the real chart."""
        l, m = self.l_real, self.m_real
        return 2 * (np.outer(l, l.conj()) + np.outer(m, m.conj())).real

    def real_coframe(self) -> np.ndarray:
        """Rows e^a with metric() = sum_a e^a e^a: sqrt(2) (Re l, Im l, Re m, Im m)."""
        l, m = self.l_real, self.m_real
        return np.sqrt(2) * np.array([l.real, l.imag, m.real, m.imag])

    def frame(self) -> np.ndarray:
        """M with M metric() M^T = 1, from the coframe rather than from the metric.

        The coframe matrix is conditioned like the square root of the metric,
        so this stays accurate much closer to the singular locus than a
        factorisation of the metric.  One Newton step refines the double
        precision inverse in the precision of the coframe.
        """
        E = self.real_coframe()
        X = np.linalg.inv(E.astype(float)).astype(E.dtype)
        X = X + X @ (np.eye(4, dtype=E.dtype) - E @ X)
        return X.T


def coframe_raw(vj, nu):
    """(l, m) complex-basis components, generic in the number type."""
    a, b, c = abc_raw(vj, nu)
    v = vj[ZERO]
    D = c * c - _re(a * _conj(a))
    ac = _conj(a)
    norm_l = 1 / (v * _sqrt(c * D))
    l = [c * c * norm_l, ac * c * norm_l, c * b * norm_l, ac * _conj(b) * norm_l]
    m = [0, 0, _sqrt(D) / (v * _sqrt(c)), 0]
    return l, m


def _check_signature_domain(vj, nu):
    mabc = abc(vj, nu)
    v = vj[ZERO].real
    D = mabc.c * mabc.c - abs(mabc.a) ** 2
    if not v > 0:
        raise DomainError(f"v = {v:.6g} <= 0: outside positivity domain")
    if not (mabc.c > 0 and D > 0):
        raise DomainError(f"coframe needs c > 0 and c^2 - |a|^2 > 0 (got c={mabc.c:.6g}, D={D:.6g})")
    return D


def coframe_at(potential: ExpSumPotential, nu: float, at, dtype=complex) -> Coframe:
    """Coframe at a point; ``dtype=JET_DTYPE`` evaluates it in extended precision."""
    vj = jet(potential, as_point(at), 1, dtype=dtype)
    _check_signature_domain(vj, nu)
    l, m = coframe_raw(vj, nu)
    return Coframe(np.array(l, dtype=dtype), np.array(m, dtype=dtype))


def coframe_taylor(potential: ExpSumPotential, nu: float, at, dtype=JET_DTYPE):
    """Real-chart coframe components as TaylorScalars (for exterior derivatives)."""
    vj = jet(potential, as_point(at), 3, dtype=dtype)
    _check_signature_domain(vj, nu)
    l, m = coframe_raw(taylor_jet_table(vj), nu)
    return _to_real_basis(l), _to_real_basis(m)


def _to_real_basis(w):
    out = []
    for i in range(4):
        acc = TaylorScalar(0)
        for A in range(4):
            if CHAIN[i, A] != 0 and not (isinstance(w[A], int) and w[A] == 0):
                acc = acc + w[A] * CHAIN[i, A]
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# Kaehler triple
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoForm:
    """Real 2-form; ``matrix`` is antisymmetric with F = 1/2 F_ij dx^i ^ dx^j."""

    matrix: np.ndarray

    @property
    def components(self) -> np.ndarray:
        """The six independent entries F_ij, i < j, in lexicographic order."""
        iu = np.triu_indices(self.matrix.shape[0], 1)
        return self.matrix[iu]


def triple_raw(l, m):
    """theta0, theta+, theta- as 4x4 nested lists from real-chart l, m (generic)."""
    n = len(l)
    t0 = [[0] * n for _ in range(n)]
    tp = [[0] * n for _ in range(n)]
    tm = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            ll = l[i] * _conj(l[j]) - l[j] * _conj(l[i])
            mm = m[i] * _conj(m[j]) - m[j] * _conj(m[i])
            x = l[i] * _conj(m[j]) - l[j] * _conj(m[i])
            # ll and mm are imaginary; multiply by -i
            t0[i][j] = _im(ll) - _im(mm)
            tp[i][j] = _re(x)
            tm[i][j] = _im(x)
            for t in (t0, tp, tm):
                t[j][i] = -t[i][j]
    return t0, tp, tm


def kahler_triple(coframe: Coframe) -> tuple:
    l, m = coframe.l_real, coframe.m_real
    real = np.real(l).dtype
    return tuple(TwoForm(np.array(t, dtype=real)) for t in triple_raw(list(l), list(m)))


def kahler_triple_complex(coframe: Coframe) -> tuple:
    """The triple before discarding imaginary parts (for reality checks)."""
    l, m = coframe.l_real, coframe.m_real
    ll = np.outer(l, l.conj()) - np.outer(l.conj(), l)
    mm = np.outer(m, m.conj()) - np.outer(m.conj(), m)
    lm = np.outer(l, m.conj()) - np.outer(m.conj(), l)
    lbm = np.outer(l.conj(), m) - np.outer(m, l.conj())
    return (-1j * (ll - mm), 0.5 * (lm + lbm), (lm - lbm) / 2j)


def orthonormal_frame(g: np.ndarray):
    """(M, L) with M g M^T = 1 and L = M^-1, i.e. g = L L^T.

    Two Cholesky passes: the first in double precision, the second on the
    nearly-unit remainder, with M accumulated in the precision of ``g``.  For
    long-double input this keeps the frame accurate even when the chart
    metric is badly conditioned.  det M > 0, so orientation is preserved.
    """
    g = np.asarray(g)
    dt = np.result_type(g.dtype, np.float64)
    try:
        L1 = np.linalg.cholesky(g.astype(float))
        M1 = np.linalg.inv(L1).astype(dt)
        g1 = (M1 @ g @ M1.T).astype(float)
        L2 = np.linalg.cholesky(0.5 * (g1 + g1.T))
    except np.linalg.LinAlgError as exc:
        raise DomainError("metric is not positive definite") from exc
    M = np.linalg.inv(L2).astype(dt) @ M1
    return M, L1 @ L2


def to_frame(F: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Covariant 2-tensor components in the frame of :func:`orthonormal_frame` (double)."""
    return (M @ F @ M.T).astype(float)


def form_inner(F: np.ndarray, G: np.ndarray, g: np.ndarray, frame: np.ndarray | None = None) -> float:
    """<F, G>_g = 1/2 F_ij G^ij, evaluated in an orthonormal frame.

    ``frame`` (an M with M g M^T = 1) skips factorising ``g``.
    """
    M = orthonormal_frame(g)[0] if frame is None else frame
    return 0.5 * float(np.sum(to_frame(F, M) * to_frame(G, M)))
