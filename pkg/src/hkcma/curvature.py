"""Levi-Civita curvature, Hodge duality and hyper-Kaehler checks.

Tensor index conventions (chart components, all arrays numpy):

* ``Gamma[a, b, c]`` = Gamma^a_{bc}; ``dGamma[a, b, c, e]`` = d_e Gamma^a_{bc}
* ``R[a, b, c, d]`` = R^a_{bcd} with
  R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb}
* ``Rl[a, b, c, d]`` = g_{ae} R^e_{bcd}
* 2-forms are antisymmetric matrices F with F = 1/2 F_ij dx^i ^ dx^j.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import DomainError, OrientationError, RangeError, SingularInputError
from .expsum import UNIT, ZERO, ExpSumPotential, as_point, jet
from .jets import CHAIN
from .geometry import MetricJet

#: Self-duality tolerance used when calibrating orientation.
ORIENTATION_TOL = 1e-8
#: Floor in the Hitchin saturation denominator.
SATURATION_EPS = 1e-300


def levi_civita(n: int = 4) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i, j in itertools.combinations(range(n), 2) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


EPS4 = levi_civita(4)


def christoffel(mj: MetricJet):
    """Christoffel symbols and their first derivatives from an exact metric jet."""
    g, dg, ddg = mj.g, mj.dg, mj.ddg
    try:
        gi = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise SingularInputError("metric is not invertible") from exc
    if not np.all(np.isfinite(gi)) or abs(np.linalg.det(g)) == 0:
        raise SingularInputError("metric is not invertible")
    # lowered symbols Gamma_{dbc} = 1/2 (d_b g_dc + d_c g_db - d_d g_bc)
    low = 0.5 * (
        np.einsum("dcb->dbc", dg) + np.einsum("dbc->dbc", dg) - np.einsum("bcd->dbc", dg)
    )
    dlow = 0.5 * (
        np.einsum("dcbe->dbce", ddg) + np.einsum("dbce->dbce", ddg) - np.einsum("bcde->dbce", ddg)
    )
    Gamma = np.einsum("ad,dbc->abc", gi, low)
    dgi = -np.einsum("ap,pqe,qd->ade", gi, dg, gi)
    dGamma = np.einsum("ade,dbc->abce", dgi, low) + np.einsum("ad,dbce->abce", gi, dlow)
    return Gamma, dGamma


def riemann_from_christoffel(Gamma: np.ndarray, dGamma: np.ndarray) -> np.ndarray:
    """R^a_{bcd} from Gamma^a_{bc} and d_e Gamma^a_{bc}."""
    return (
        np.einsum("adbc->abcd", dGamma)
        - np.einsum("acbd->abcd", dGamma)
        + np.einsum("ace,edb->abcd", Gamma, Gamma)
        - np.einsum("ade,ecb->abcd", Gamma, Gamma)
    )


def riemann_from_jet(mj: MetricJet) -> np.ndarray:
    """Fully lowered R_{abcd}."""
    Gamma, dGamma = christoffel(mj)
    R = riemann_from_christoffel(Gamma, dGamma)
    return np.einsum("ae,ebcd->abcd", mj.g, R)


def symmetry_defects(Rl: np.ndarray) -> dict:
    """Relative violations of the algebraic Riemann symmetries and first Bianchi."""
    scale = max(float(np.abs(Rl).max()), 1e-300)
    bianchi = Rl + np.einsum("abcd->acdb", Rl) + np.einsum("abcd->adbc", Rl)
    return {
        "antisym_ab": float(np.abs(Rl + np.einsum("abcd->bacd", Rl)).max()) / scale,
        "antisym_cd": float(np.abs(Rl + np.einsum("abcd->abdc", Rl)).max()) / scale,
        "pair_sym": float(np.abs(Rl - np.einsum("abcd->cdab", Rl)).max()) / scale,
        "bianchi": float(np.abs(bianchi).max()) / scale,
    }


def orthonormal_basis(g: np.ndarray):
    """(L, M) with g = L L^T and M = L^-1 (see :func:`geometry.orthonormal_frame`)."""
    M, L = geometry.orthonormal_frame(g)
    return L, M


def to_orthonormal(mj: MetricJet):
    """Metric jet in the chart y = L^T x, where the metric is the unit matrix, plus L.

    The change of chart runs in the precision of the jet arrays; the result
    is double precision and exactly symmetric in the metric and derivative
    index pairs.
    """
    M, L = geometry.orthonormal_frame(mj.g)
    g = (M @ mj.g @ M.T).astype(float)
    dg = np.einsum("ia,jb,kc,abc->ijk", M, M, M, mj.dg).astype(float)
    ddg = np.einsum("ia,jb,kc,ld,abcd->ijkl", M, M, M, M, mj.ddg).astype(float)
    g = 0.5 * (g + g.T)
    dg = 0.5 * (dg + dg.transpose(1, 0, 2))
    ddg = 0.5 * (ddg + ddg.transpose(1, 0, 2, 3))
    ddg = 0.5 * (ddg + ddg.transpose(0, 1, 3, 2))
    return MetricJet(g, dg, ddg), L


def _lower_pair(F, M):
    return np.einsum("ia,jb,...ab->...ij", M, M, F)


def _flat_star(F, orientation_sign):
    return 0.5 * orientation_sign * np.einsum("abcd,...cd->...ab", EPS4, F)


def hodge_star(F: np.ndarray, g: np.ndarray, orientation_sign: int = 1) -> np.ndarray:
    """(*F)_ab = 1/2 sign sqrt(det g) eps_abcd F^cd on the last two axes of F.

    Evaluated in a point-orthonormal chart, where it reduces to 1/2 eps F.
    """
    M, L = geometry.orthonormal_frame(g)
    Fo = _lower_pair(F, M).astype(float)
    return _lower_pair(_flat_star(Fo, orientation_sign), L)


def wedge_coefficient(F: np.ndarray, G: np.ndarray, g: np.ndarray, orientation_sign: int = 1) -> np.ndarray:
    """Coefficient of the oriented volume form in F ^ G (2-forms on the last two axes)."""
    M, _ = geometry.orthonormal_frame(g)
    Fo, Go = _lower_pair(F, M).astype(float), _lower_pair(G, M).astype(float)
    return 0.25 * orientation_sign * np.einsum("abcd,...ab,...cd->...", EPS4, Fo, Go)


@dataclass
class CurvaturePack:
    """Curvature at one point.

    ``riemann`` is R_abcd in the coordinate chart; ``frame_riemann`` holds the
    same tensor in the point-orthonormal chart, where every norm below is
    taken (so norms are metric-invariant).
    """

    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    asd_residual: float
    sd_part_norm: float
    asd_part_norm: float
    orientation_sign: int
    symmetry: dict
    metric: np.ndarray
    frame_riemann: np.ndarray
    frame_ricci: np.ndarray
    #: Estimated relative rounding error of ``frame_riemann`` (0 when not estimated).
    rounding_estimate: float = 0.0

    @property
    def riemann_norm(self) -> float:
        return float(np.linalg.norm(self.frame_riemann))

    @property
    def ricci_ratio(self) -> float:
        n = self.riemann_norm
        return float(np.linalg.norm(self.frame_ricci)) / n if n > 0 else 0.0

    @property
    def flat(self) -> bool:
        return self.riemann_norm == 0.0


def self_duality_defects(forms, g, frame: np.ndarray | None = None) -> dict:
    """Worst relative |*F - F| per orientation sign, computed in an orthonormal frame.

    ``frame`` is an M with M g M^T = 1 and det M > 0; by default it is
    factorised from ``g``.
    """
    M = geometry.orthonormal_frame(g)[0] if frame is None else frame
    frames = [geometry.to_frame(F, M) for F in forms]
    out = {}
    for s in (1, -1):
        out[s] = max(
            float(np.abs(_flat_star(F, s) - F).max()) / max(float(np.abs(F).max()), 1e-300)
            for F in frames
        )
    return out


def calibrate_orientation(potential: ExpSumPotential, nu: float, at, tol: float = ORIENTATION_TOL) -> int:
    """Orientation sign (+1 or -1 relative to dx1^dx2^dx3^dx4) making the Kaehler triple self-dual."""
    cf = geometry.coframe_at(potential, nu, at, dtype=geometry.JET_DTYPE)
    forms = [t.matrix for t in geometry.kahler_triple(cf)]
    M = cf.frame()
    if np.linalg.det(M.astype(float)) < 0:
        M[3] *= -1
    defects = self_duality_defects(forms, cf.metric(), M)
    good = [s for s, d in defects.items() if d <= tol]
    if len(good) != 1:
        raise OrientationError(f"self-duality defects per orientation: {defects}")
    return good[0]


def curvature_from_metric_jet(mj: MetricJet, orientation_sign: int = 1) -> CurvaturePack:
    mo, L = to_orthonormal(mj)
    if not np.allclose(mo.g, np.eye(mo.dim), rtol=0, atol=1e-14):
        mo, L2 = to_orthonormal(mo)  # polish residual non-orthonormality
        L = L @ L2
    Ro = riemann_from_jet(mo)
    gi_o = np.linalg.inv(mo.g)
    ricci_o = np.einsum("ca,abcd->bd", gi_o, Ro)
    scalar = float(np.einsum("bd,bd->", gi_o, ricci_o))
    norm = float(np.linalg.norm(Ro))
    if norm == 0.0:
        asd = sd = anti = 0.0
    else:
        star = 0.5 * orientation_sign * np.einsum("abcd,xycd->xyab", EPS4, Ro)
        asd = float(np.linalg.norm(Ro + star)) / norm
        sd = 0.5 * float(np.linalg.norm(Ro + star))
        anti = 0.5 * float(np.linalg.norm(Ro - star))
    R_chart = np.einsum("ia,jb,kc,ld,abcd->ijkl", L, L, L, L, Ro)
    ricci = np.einsum("ia,jb,ab->ij", L, L, ricci_o)
    return CurvaturePack(
        R_chart, ricci, scalar, asd, sd, anti, orientation_sign,
        symmetry_defects(Ro), np.asarray(mj.g, dtype=float), Ro, ricci_o,
    )


def _pack_from_frame(Ro: np.ndarray, E: np.ndarray, g: np.ndarray, orientation_sign: int) -> CurvaturePack:
    """CurvaturePack from frame components R_abcd and the coframe rows E[a, i]."""
    ricci_o = np.einsum("abad->bd", Ro)
    scalar = float(np.trace(ricci_o))
    norm = float(np.linalg.norm(Ro))
    if norm == 0.0:
        asd = sd = anti = 0.0
    else:
        star = _flat_star(Ro, orientation_sign)
        asd = float(np.linalg.norm(Ro + star)) / norm
        sd = 0.5 * float(np.linalg.norm(Ro + star))
        anti = 0.5 * float(np.linalg.norm(Ro - star))
    R_chart = np.einsum("ai,bj,ck,dl,abcd->ijkl", E, E, E, E, Ro)
    ricci = np.einsum("ai,bj,ab->ij", E, E, ricci_o)
    return CurvaturePack(
        R_chart, ricci, scalar, asd, sd, anti, orientation_sign,
        symmetry_defects(Ro), g, Ro, ricci_o,
    )


def coframe_jet(potential: ExpSumPotential, nu: float, at, dtype=geometry.JET_DTYPE):
    """Real orthonormal coframe rows E[a, i] with first and second chart derivatives.

    ``E1[a, i, k] = d_k E[a, i]`` and ``E2[a, i, k, l] = d_k d_l E[a, i]``.
    The rows are sqrt(2) (Re l, Im l, Re m, Im m), with the last row negated
    if needed so that the frame is positively oriented in the chart.  Arrays
    are in extended precision.
    """
    l, m = geometry.coframe_taylor(potential, nu, at, dtype)
    rows = []
    for level in ("value", "grad", "hess"):
        lv = np.array([np.asarray(getattr(t, level)) for t in l])
        mv = np.array([np.asarray(getattr(t, level)) for t in m])
        rows.append(np.sqrt(lv.real.dtype.type(2)) * np.array([lv.real, lv.imag, mv.real, mv.imag]))
    E0, E1, E2 = rows
    if np.linalg.det(E0.astype(float)) < 0:
        for arr in (E0, E1, E2):
            arr[3] *= -1
    return E0, E1, E2


def _refined_inverse(A: np.ndarray) -> np.ndarray:
    X = np.linalg.inv(A.astype(float)).astype(A.dtype)
    eye = np.eye(len(A), dtype=A.dtype)
    for _ in range(2):
        X = X + X @ (eye - A @ X)
    return X


def frame_riemann_from_coframe(E0: np.ndarray, E1: np.ndarray, E2: np.ndarray) -> np.ndarray:
    """Frame components R_abcd from Cartan's structure equations.

    With de^a = 1/2 C_abc e^b ^ e^c, the connection is
    w_abc = 1/2 (C_abc + C_bca - C_cab) (w^a_b = w_abc e^c, de^a = -w^a_b ^ e^b)
    and R_abcd = D_c w_abd - D_d w_abc + w_abe C_ecd + w_aec w_ebd - w_aed w_ebc,
    the same convention as :func:`riemann_from_christoffel`.  The metric is
    never formed, so accuracy follows the conditioning of the coframe rather
    than that of the metric.
    """
    X0 = _refined_inverse(E0)  # X0[i, a]
    X1 = -np.einsum("ib,bjk,ja->iak", X0, E1, X0)
    dE = np.einsum("ajk->akj", E1) - E1  # dE[a, k, j] = d_k E_aj - d_j E_ak
    ddE = np.einsum("ajkl->akjl", E2) - E2
    C = np.einsum("aij,ib,jc->abc", dE, X0, X0)
    dC = (np.einsum("aijk,ib,jc->abck", ddE, X0, X0)
          + np.einsum("aij,ibk,jc->abck", dE, X1, X0)
          + np.einsum("aij,ib,jck->abck", dE, X0, X1))

    def connection(T):
        return 0.5 * (T + np.einsum("bca...->abc...", T) - np.einsum("cab...->abc...", T))

    w = connection(C)
    Dw = np.einsum("abck,kd->abcd", connection(dC), X0)  # Dw[a, b, c, d] = D_d w_abc
    R = (np.einsum("abdc->abcd", Dw) - Dw
         + np.einsum("abe,ecd->abcd", w, C)
         + np.einsum("aec,ebd->abcd", w, w)
         - np.einsum("aed,ebc->abcd", w, w))
    return R


#: Ratio of double to extended machine epsilon, used to scale rounding estimates.
EPS_RATIO = float(np.finfo(float).eps / np.finfo(geometry.JET_DTYPE).eps)


def riemann(potential: ExpSumPotential, nu: float, at, orientation_sign: int | None = None,
            estimate_rounding: bool = True) -> CurvaturePack:
    """Curvature of the metric at ``at`` with orientation calibrated on the Kaehler triple.

    Computed in the orthonormal coframe (see :func:`frame_riemann_from_coframe`)
    in extended precision.  With ``estimate_rounding`` the same computation
    is repeated in double precision; rounding errors scale with the machine
    epsilon, so the difference divided by the epsilon ratio estimates the
    error of the extended result.
    """
    if orientation_sign is None:
        orientation_sign = calibrate_orientation(potential, nu, at)
    E0, E1, E2 = coframe_jet(potential, nu, at)
    R_ext = frame_riemann_from_coframe(E0, E1, E2)
    Ro = R_ext.astype(float)
    E = E0.astype(float)
    pack = _pack_from_frame(Ro, E, E.T @ E, orientation_sign)
    if estimate_rounding:
        R_dbl = frame_riemann_from_coframe(*coframe_jet(potential, nu, at, complex))
        scale = float(np.abs(Ro).max())
        if scale > 0:
            pack.rounding_estimate = float(np.abs(R_dbl - Ro).max()) / scale / EPS_RATIO
    return pack


def asd_residual(potential: ExpSumPotential, nu: float, at, orientation_sign: int | None = None):
    """(residual, flat_flag): ||Omega + *Omega|| / ||Omega||, star on the form indices."""
    pack = riemann(potential, nu, at, orientation_sign)
    return pack.asd_residual, pack.flat


def exterior_derivative_2form(grad: np.ndarray) -> np.ndarray:
    """(dF)_ijk from grad[i, j, k] = d_k F_ij of an antisymmetric 2-form."""
    # (dF)_{ijk} = d_i F_jk + d_j F_ki + d_k F_ij
    return (
        np.einsum("jki->ijk", grad) + np.einsum("kij->ijk", grad) + np.einsum("ijk->ijk", grad)
    )


def closedness_from_grad(grad: np.ndarray) -> float:
    """||dF|| / ||grad F||, 0 for constant coefficients."""
    dF = exterior_derivative_2form(grad)
    scale = float(np.linalg.norm(grad))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(dF)) / scale


def kahler_triple_grads(potential: ExpSumPotential, nu: float, at):
    """Values and chart gradients of theta0, theta+, theta-."""
    l, m = geometry.coframe_taylor(potential, nu, at)
    out = []
    for t in geometry.triple_raw(l, m):
        val = np.zeros((4, 4))
        grad = np.zeros((4, 4, 4))
        for i in range(4):
            for j in range(4):
                if i != j:
                    val[i, j] = np.real(t[i][j].value)
                    grad[i, j] = t[i][j].grad.real
        out.append((val, grad))
    return out


def closedness_residual(potential: ExpSumPotential, nu: float, at) -> tuple:
    return tuple(closedness_from_grad(grad) for _, grad in kahler_triple_grads(potential, nu, at))


@dataclass
class DensityPair:
    chi_density: float
    tau_density: float

    @property
    def saturation_residual(self) -> float:
        return abs(self.chi_density + 1.5 * self.tau_density) / (
            abs(self.chi_density) + abs(self.tau_density) + SATURATION_EPS
        )


def densities_from_pack(pack: CurvaturePack) -> DensityPair:
    """Euler and signature integrand densities (volume-form coefficients)."""
    s = pack.orientation_sign
    Om = pack.frame_riemann  # indices raise trivially in the orthonormal chart
    star = 0.5 * s * np.einsum("abcd,xycd->xyab", EPS4, Om)

    def wedge(F, G):
        return 0.25 * s * np.einsum("abcd,xyab,yxcd->", EPS4, F, G)

    chi = float(wedge(Om, star)) / (16 * math.pi**2)
    tau = float(wedge(Om, Om)) / (24 * math.pi**2)
    return DensityPair(chi, tau)


def hitchin_density(potential: ExpSumPotential, nu: float, at, orientation_sign: int | None = None) -> DensityPair:
    return densities_from_pack(riemann(potential, nu, at, orientation_sign))


@dataclass
class KillingScan:
    rank: int
    singular_values: np.ndarray
    null_directions: np.ndarray  # rows: orthonormal basis of the null space
    n_points: int
    field: str = "metric"


def _metric_rows(potential, nu, x):
    mj = geometry.metric_jet(potential, nu, as_point(x).to_real())
    iu = np.triu_indices(4)
    return mj.dg[iu] / np.abs(mj.g[iu]).max()  # (10, 4)


def _log_gradient_rows(potential, nu, x):
    """Chart gradients of Re, Im of d_k log v; the metric is a function of these."""
    vj = jet(potential, as_point(x), 2)
    v = vj[ZERO].real
    if v == 0:
        raise DomainError("v = 0")
    rows = []
    for k in UNIT:
        # d_j (v_k / v) = v_kj / v - v_k v_j / v^2, pulled back to the real chart
        w = np.array([vj[k + u] / v - vj[k] * vj[u] / v**2 for u in UNIT])
        grad = CHAIN @ w
        scale = max(abs(vj[k] / v), 1.0)
        rows += [grad.real / scale, grad.imag / scale]
    return np.array(rows)


def killing_scan(potential: ExpSumPotential, nu: float, points, rel_threshold: float = 1e-8,
                 min_points: int = 10, field: str = "auto") -> KillingScan:
    """Constant translational symmetries from stacked gradients.

    ``field="metric"`` stacks the gradients of the ten metric components at
    points passing the metric guards.  ``field="log_gradient"`` stacks the
    gradients of the logarithmic derivatives of v, on which the metric
    depends; it is defined wherever v != 0 and so also covers potentials
    whose metric is singular everywhere.  ``"auto"`` uses the metric when
    enough points pass its guards and the log-gradient field otherwise.
    """
    if field not in ("auto", "metric", "log_gradient"):
        raise ValueError(f"unknown field {field!r}")
    builders = {"metric": _metric_rows, "log_gradient": _log_gradient_rows}
    order = ["metric", "log_gradient"] if field == "auto" else [field]
    counts = {}
    for name in order:
        rows = []
        for x in points:
            try:
                rows.append(builders[name](potential, nu, x))
            except (DomainError, RangeError):
                continue
        counts[name] = len(rows)
        if len(rows) >= min_points:
            break
    else:
        raise DomainError(f"killing_scan needs >= {min_points} valid points, got {counts}")
    M = np.vstack(rows)
    _, sv, vt = np.linalg.svd(M)
    rank = int(np.sum(sv > rel_threshold * sv[0])) if sv[0] > 0 else 0
    return KillingScan(rank, sv, vt[rank:], len(rows), name)
