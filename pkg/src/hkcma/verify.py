"""Residual suites over sampled points.

Every check reports the worst relative residual seen, the point where it
occurred and whether it stays within tolerance.  Residuals are normalised by
the sum of magnitudes of the products they are built from, so that the
exponential growth of the potential does not leak into the tolerances.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import __version__, curvature, geometry
from .errors import DomainError, HKError, NearLocusError, OrientationError, RangeError
from .expsum import (D2, DP, DQ, DW, ZERO, ExpSumPotential, WirtingerIndex, as_point,
                     conjugation_check, jet, values)
from .jets import WirtingerSeries

DEFAULT_BOX = ((-1.0, 1.0),) * 4
DEFAULT_TOLERANCES = {
    "linear_system": 1e-8,
    "partner_system": 1e-8,
    "legendre_cma": 1e-8,
    "second_derivatives": 1e-8,
    "third_derivatives": 1e-8,
    "compatibility": 1e-8,
    "b_identity": 1e-8,
    "np_reconstruction": 1e-10,
    "signature": 0.0,
    "kahler_reality": 1e-10,
    "kahler_orthonormality": 1e-10,
    "riemann_symmetry": 1e-9,
    "ricci_ratio": 1e-6,
    "asd": 1e-6,
    "closedness": 1e-6,
    "hitchin_saturation": 1e-6,
}
DEFAULT_GUARDS = {
    "near_locus_rel": geometry.NEAR_LOCUS_REL,
    "one_minus_abs_a2": 1e-8,
    "max_exclusion": 0.9,
    "bounded_away_rel": 1e-6,
    "rounding_rel": 1e-10,
}
#: Expected |theta_i|^2 of the Kaehler triple (theta0, theta+, theta-).
TRIPLE_NORMS = (2.0, 0.5, 0.5)


@dataclass(frozen=True)
class SuiteConfig:
    box: tuple = DEFAULT_BOX
    n_points: int = 200
    seed: int = 42
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    guards: dict = field(default_factory=lambda: dict(DEFAULT_GUARDS))
    max_draws: int | None = None

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if len(box) != 4 or any(not (lo < hi) or not np.isfinite([lo, hi]).all() for lo, hi in box):
            raise ValueError(f"box needs four finite nonempty intervals, got {self.box}")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "tolerances", {**DEFAULT_TOLERANCES, **self.tolerances})
        object.__setattr__(self, "guards", {**DEFAULT_GUARDS, **self.guards})

    @property
    def draw_limit(self) -> int:
        return self.max_draws if self.max_draws is not None else 50 * self.n_points


@dataclass
class CheckResult:
    name: str
    worst_residual: float
    worst_point: list | None
    tolerance: float
    passed: bool
    n_points: int = 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "worst_residual": self.worst_residual,
            "worst_point": self.worst_point,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "n_points": self.n_points,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckResult":
        return cls(d["name"], d["worst_residual"], d["worst_point"], d["tolerance"], d["pass"],
                   d.get("n_points", 0))


@dataclass
class SuiteReport:
    checks: list = field(default_factory=list)
    guards: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    orientation_sign: int | None = None
    messages: list = field(default_factory=list)
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def merge(self, other: "SuiteReport") -> "SuiteReport":
        sign = self.orientation_sign if self.orientation_sign is not None else other.orientation_sign
        return SuiteReport(
            self.checks + other.checks,
            {**self.guards, **other.guards},
            {**self.stats, **other.stats},
            sign,
            self.messages + other.messages,
            self.version,
        )

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "passed": self.passed,
            "orientation_sign": self.orientation_sign,
            "checks": [c.to_dict() for c in self.checks],
            "guards": dict(self.guards),
            "stats": dict(self.stats),
            "messages": list(self.messages),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteReport":
        return cls(
            [CheckResult.from_dict(c) for c in d["checks"]],
            dict(d["guards"]),
            dict(d["stats"]),
            d["orientation_sign"],
            list(d["messages"]),
            d["version"],
        )


class _Tracker:
    """Running worst residual of one check."""

    def __init__(self, name: str, tol: float):
        self.name, self.tol = name, tol
        self.worst, self.where, self.n = 0.0, None, 0

    def add(self, residual: float, x) -> None:
        self.n += 1
        r = float(residual)
        if not (r <= self.worst) or self.where is None:  # NaN counts as worst
            self.worst, self.where = r, [float(t) for t in x]

    def result(self) -> CheckResult:
        ok = bool(self.worst <= self.tol)
        return CheckResult(self.name, self.worst, self.where, self.tol, ok, self.n)


def _rel(residual, *parts) -> float:
    scale = sum(abs(complex(p)) for p in parts)
    return abs(complex(residual)) / scale if scale > 0 else abs(complex(residual))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_points(potential: ExpSumPotential, config: SuiteConfig):
    """Uniform draws from the box until ``n_points`` satisfy v > 0.

    Returns (points, n_draws, n_nonpositive, n_out_of_range); the sequence
    depends only on the seed, the box and the potential.
    """
    rng = np.random.default_rng(config.seed)
    lo = np.array([b[0] for b in config.box])
    hi = np.array([b[1] for b in config.box])
    kept: list = []
    draws = nonpos = overflow = 0
    while len(kept) < config.n_points and draws < config.draw_limit:
        x = lo + (hi - lo) * rng.random(4)
        draws += 1
        try:
            v = float(values(potential, x[None, :])[0])
        except RangeError:
            overflow += 1
            continue
        if v > 0:
            kept.append(x)
        else:
            nonpos += 1
    return np.array(kept).reshape(-1, 4), draws, nonpos, overflow


def _coverage_check(name, usable, total, config) -> tuple[CheckResult, list]:
    frac = 1.0 - usable / total if total else 1.0
    limit = config.guards["max_exclusion"]
    msgs = []
    if frac > limit:
        msgs.append(
            f"{name}: {100 * frac:.1f}% of sampled points excluded; "
            "choose a box where v > 0 and c^2 - |a|^2 > 0 hold on a larger fraction"
        )
    return CheckResult(name, frac, None, limit, frac <= limit, total), msgs


# ---------------------------------------------------------------------------
# PDE suite
# ---------------------------------------------------------------------------


def _linear_residuals(potential: ExpSumPotential, nu: float, x) -> list:
    """The four constant-coefficient equations for v, relative to term magnitudes."""
    w = np.abs(potential._exponentials(as_point(x)))
    lp, lq, l2, lw = potential._exp.T
    vj = jet(potential, as_point(x), 2)
    v = vj[ZERO]
    g = vj.get
    res = [
        (g(1, 1, 0, 0) + v, [lp * lq, 1]),
        (g(2, 0, 0, 0) + v - 1j * (g(0, 0, 1, 0) - nu * g(1, 0, 0, 0)),
         [lp * lp, 1, l2, nu * lp]),
        (g(1, 0, 0, 1) + nu * v - 1j * (g(1, 0, 0, 0) - g(0, 1, 0, 0)),
         [lp * lw, nu, lp, lq]),
        (g(0, 0, 1, 1) + nu * nu * v
         - 1j * (g(0, 0, 1, 0) - g(0, 0, 0, 1) + nu * (g(1, 0, 0, 0) - g(0, 1, 0, 0))),
         [l2 * lw, nu * nu, l2, lw, nu * lp, nu * lq]),
    ]
    out = []
    for r, parts in res:
        scale = float(np.dot(w, sum(np.abs(np.broadcast_to(p, w.shape)) for p in parts)))
        out.append(abs(r) / scale if scale > 0 else abs(r))
    return out


def _series_coeffs(psi: WirtingerSeries, nu: float):
    """A, B, C as series from the first-derivative series of psi."""
    f = geometry.phi_derivs(nu)
    fp, fq, f2, fw = f[DP], f[DQ], f[D2], f[DW]
    sp, sq, s2, sw = (psi.diff(d) for d in range(4))
    den = sp * sq + fp * fq
    A = (sp * sp + fp * fp + 1j * (s2 * fp - sp * f2)) / den
    C = (sp * sw + fp * fw + 1j * (sp * fq - sq * fp)) / den
    B = (s2 * sw + f2 * fw + 1j * (sp * fw - sw * fp + s2 * fq - sq * f2)) / den
    return A, B, C


def pde_point_residuals(potential: ExpSumPotential, nu: float, x, one_minus_guard: float = 1e-8) -> dict:
    """All partner-system residuals at one point with v > 0 (values are relative)."""
    psi = geometry.psi_series(potential, x, 3)
    d = psi.derivative
    K = WirtingerIndex
    ps = {k: d(k) for k in (DP, DQ, D2, DW)}
    pp, qq, pq = d(K(2, 0, 0, 0)), d(K(0, 2, 0, 0)), d(K(1, 1, 0, 0))
    pw, q2, tw = d(K(1, 0, 0, 1)), d(K(0, 1, 1, 0)), d(K(0, 0, 1, 1))
    f = geometry.phi_derivs(nu)
    fp, fq, f2, fw = f[DP], f[DQ], f[D2], f[DW]
    sp, sq, s2, sw = ps[DP], ps[DQ], ps[D2], ps[DW]
    out: dict = {}

    # six second-order equations for psi with the translational phi
    partner = [
        _rel(pq - (fp * fq + sp * sq), pq, fp * fq, sp * sq),
        _rel(pp - (fp * fp + sp * sp + 1j * (fp * s2 - f2 * sp)), pp, fp * fp, sp * sp, fp * s2, f2 * sp),
        _rel(pw - (fp * fw + sp * sw + 1j * (fq * sp - fp * sq)), pw, fp * fw, sp * sw, fq * sp, fp * sq),
        _rel(tw - (f2 * fw + s2 * sw + 1j * (sp * fw - fp * sw + s2 * fq - f2 * sq)),
             tw, f2 * fw, s2 * sw, sp * fw, fp * sw, s2 * fq, f2 * sq),
        _rel(qq - (fq * fq + sq * sq - 1j * (fq * sw - fw * sq)), qq, fq * fq, sq * sq, fq * sw, fw * sq),
        _rel(q2 - (fq * f2 + sq * s2 - 1j * (fp * sq - fq * sp)), q2, fq * f2, sq * s2, fp * sq, fq * sp),
    ]
    out["partner_system"] = max(partner)

    # Legendre-transformed Monge-Ampere equation
    out["legendre_cma"] = _rel(pq * tw - pw * q2 - pp * qq + pq * pq, pq * tw, pw * q2, pp * qq, pq * pq)

    As, Bs, Cs = _series_coeffs(psi, nu)
    A, B, C = As.constant, Bs.constant, Cs.constant
    out["second_derivatives"] = max(
        _rel(pp - A * pq, pp, A * pq),
        _rel(pw - C * pq, pw, C * pq),
        _rel(tw - B * pq, tw, B * pq),
        _rel(qq - np.conj(A) * pq, qq, A * pq),
        _rel(q2 - np.conj(C) * pq, q2, C * pq),
    )
    ident = abs(A) ** 2 + abs(C) ** 2 - 1
    out["b_identity"] = _rel(B - ident, B, abs(A) ** 2, abs(C) ** 2, 1)

    # third derivatives (cleared of the 1 - |A|^2 denominator) and the
    # compatibility conditions derived from them; both need |A| != 1
    Ab, Cb = As.conjugate(), Cs.conjugate()
    A_p, A_q, A_w = (As.diff(k).constant for k in (0, 1, 3))
    C_p, C_q, C_2 = (Cs.diff(k).constant for k in (0, 1, 2))
    Ab_p, Cb_p = Ab.diff(0).constant, Cb.diff(0).constant
    one_minus = 1 - abs(A) ** 2
    if abs(one_minus) > one_minus_guard:
        out["compatibility"] = max(
            _rel(A * C_q - C * A_q - C_p + A_w, A * C_q, C * A_q, C_p, A_w),
            _rel(np.conj(A) * A_p + np.conj(C) * C_p - A_q - C_2,
                 np.conj(A) * A_p, np.conj(C) * C_p, A_q, C_2),
        )
        ppq, pq2 = d(K(2, 1, 0, 0)), d(K(1, 1, 1, 0))
        num = A * Ab_p + A_q
        out["third_derivatives"] = max(
            _rel(ppq * one_minus - num * pq, ppq, ppq * abs(A) ** 2, A * Ab_p * pq, A_q * pq),
            _rel(pq2 * one_minus - (np.conj(C) * num + Cb_p * one_minus) * pq,
                 pq2, pq2 * abs(A) ** 2, C * A * Ab_p * pq, C * A_q * pq, Cb_p * pq,
                 Cb_p * abs(A) ** 2 * pq),
        )
    else:
        out["third_derivatives"] = out["compatibility"] = None
    return out


PDE_CHECKS = ("linear_system", "partner_system", "legendre_cma", "second_derivatives",
              "third_derivatives", "compatibility", "b_identity")


def pde_suite(potential: ExpSumPotential, nu: float, config: SuiteConfig | None = None,
              sample=None) -> SuiteReport:
    """Partner-system residuals of psi = -log v at sampled points of the box."""
    config = config or SuiteConfig()
    report = SuiteReport()
    conj = conjugation_check(potential)
    if not conj.passed:
        report.checks.append(CheckResult("conjugation_closure", 1.0, None, 0.0, False, len(potential)))
        report.messages.append("potential is not closed under conjugation; v is not real")
        return report
    points, draws, nonpos, overflow = sample or sample_points(potential, config)
    tol = config.tolerances
    tr = {name: _Tracker(name, tol[name]) for name in PDE_CHECKS}
    guarded_a = set()
    failed = 0
    for x in points:
        try:
            lin = _linear_residuals(potential, nu, x)
            res = pde_point_residuals(potential, nu, x, config.guards["one_minus_abs_a2"])
        except (DomainError, RangeError):
            failed += 1
            continue
        tr["linear_system"].add(max(lin), x)
        for name, r in res.items():
            if r is None:
                guarded_a.add(tuple(x))
            else:
                tr[name].add(r, x)
    report.checks = [tr[n].result() for n in PDE_CHECKS]
    usable = len(points) - failed
    cov, msgs = _coverage_check("pde_coverage", usable, draws, config)
    report.checks.append(cov)
    report.messages += msgs
    report.guards.update({
        "draws": draws,
        "v_nonpositive": nonpos,
        "out_of_range": overflow,
        "pde_evaluation_failed": failed,
        "abs_a_near_one": len(guarded_a),
    })
    return report


# ---------------------------------------------------------------------------
# geometry suite
# ---------------------------------------------------------------------------

GEOMETRY_CHECKS = ("np_reconstruction", "signature", "kahler_reality", "kahler_orthonormality",
                   "riemann_symmetry", "ricci_ratio", "asd", "closedness", "hitchin_saturation")
#: Checks built on the curvature tensor; skipped where its rounding estimate exceeds the guard.
CURVATURE_CHECKS = ("riemann_symmetry", "ricci_ratio", "asd", "hitchin_saturation")


def _triple_defects(cf: geometry.Coframe) -> tuple[float, float]:
    cplx = geometry.kahler_triple_complex(cf)
    reality = max(float(np.abs(np.imag(t)).max()) / max(float(np.abs(t).max()), 1e-300) for t in cplx)
    forms = [t.matrix for t in geometry.kahler_triple(cf)]
    g, M = cf.metric(), cf.frame()
    worst = 0.0
    for i in range(3):
        for j in range(3):
            val = geometry.form_inner(forms[i], forms[j], g, M)
            target = TRIPLE_NORMS[i] if i == j else 0.0
            worst = max(worst, abs(val - target) / TRIPLE_NORMS[i])
    return reality, worst


def geometry_point(potential: ExpSumPotential, nu: float, x, near_locus_rel: float) -> dict:
    """Metric, coframe, triple and curvature residuals at one admissible point.

    Raises ``NearLocusError`` or ``DomainError`` for guarded points.
    """
    g = geometry.metric_at(potential, nu, x, near_locus_rel).matrix
    vj = jet(potential, as_point(x), 1)
    D = geometry.singular_locus_value(vj, nu)
    positive = bool(np.all(np.linalg.eigvalsh(g) > 0))
    out = {"signature": 0.0 if positive == (D > 0) else 1.0, "D": D}
    if D <= 0:
        return out
    cf = geometry.coframe_at(potential, nu, x)
    out["np_reconstruction"] = float(np.abs(cf.metric() - g).max()) / float(np.abs(g).max())
    cf_ext = geometry.coframe_at(potential, nu, x, dtype=geometry.JET_DTYPE)
    out["kahler_reality"], out["kahler_orthonormality"] = _triple_defects(cf_ext)
    sign = curvature.calibrate_orientation(potential, nu, x)
    pack = curvature.riemann(potential, nu, x, sign)
    out["orientation_sign"] = sign
    out["rounding"] = pack.rounding_estimate
    out["riemann_symmetry"] = max(pack.symmetry.values())
    out["ricci_ratio"] = pack.ricci_ratio
    out["asd"] = pack.asd_residual
    out["closedness"] = max(curvature.closedness_residual(potential, nu, x))
    out["hitchin_saturation"] = curvature.densities_from_pack(pack).saturation_residual
    return out


def geometry_suite(potential: ExpSumPotential, nu: float, config: SuiteConfig | None = None,
                   sample=None) -> SuiteReport:
    """Metric, coframe, Kaehler triple and curvature checks at guarded sample points."""
    config = config or SuiteConfig()
    report = SuiteReport()
    points = (sample or sample_points(potential, config))[0]
    tol = config.tolerances
    tr = {name: _Tracker(name, tol[name]) for name in GEOMETRY_CHECKS}
    guard = config.guards["near_locus_rel"]
    counts = Counter()
    signs = Counter()
    locus_rel = []
    legendre = []
    near_locus_values = []
    for x in points:
        vj = jet(potential, as_point(x), 1)
        m = geometry.abc(vj, nu)
        D = m.c * m.c - abs(m.a) ** 2
        locus_rel.append(abs(D) / (m.c * m.c))
        try:
            psi2 = geometry.psi_jet(potential, x, 2)
            legendre.append(abs(geometry.legendre_existence_residual(psi2))
                            / max(abs(psi2[WirtingerIndex(1, 1, 0, 0)]) ** 2, 1e-300))
        except HKError:
            pass
        try:
            res = geometry_point(potential, nu, x, guard)
        except NearLocusError as exc:
            counts["near_locus"] += 1
            if len(near_locus_values) < 10:
                near_locus_values.append({"point": [float(t) for t in x], "locus_value": exc.locus_value})
            continue
        except OrientationError:
            counts["orientation_ambiguous"] += 1
            continue
        except (DomainError, RangeError):
            counts["domain"] += 1
            continue
        tr["signature"].add(res["signature"], x)
        if res["D"] <= 0:
            counts["indefinite"] += 1
            continue
        for name in ("np_reconstruction", "kahler_reality", "kahler_orthonormality", "closedness"):
            tr[name].add(res[name], x)
        signs[res["orientation_sign"]] += 1
        if res["rounding"] > config.guards["rounding_rel"]:
            counts["precision_limited"] += 1
            continue
        counts["curvature_points"] += 1
        for name in CURVATURE_CHECKS:
            tr[name].add(res[name], x)
    report.checks = [tr[n].result() for n in GEOMETRY_CHECKS]
    n = len(points)
    cov, msgs = _coverage_check("geometry_coverage", counts["curvature_points"], n, config)
    report.checks.append(cov)
    report.messages += msgs
    if len(signs) > 1:
        report.checks.append(CheckResult("orientation_consistency", float(min(signs.values())), None, 0.0,
                                         False, sum(signs.values())))
    report.orientation_sign = signs.most_common(1)[0][0] if signs else None
    for key in ("near_locus", "indefinite", "orientation_ambiguous", "domain", "precision_limited"):
        report.guards[key] = counts[key]
    thr = config.guards["bounded_away_rel"]
    report.stats["singular_locus"] = {
        "min_rel": float(min(locus_rel)) if locus_rel else None,
        "fraction_bounded_away": float(np.mean(np.array(locus_rel) > thr)) if locus_rel else None,
        "threshold_rel": thr,
        "near_locus_samples": near_locus_values,
    }
    report.stats["legendre_existence_min_rel"] = float(min(legendre)) if legendre else None
    return report


def full_report(potential: ExpSumPotential, nu: float, config: SuiteConfig | None = None) -> SuiteReport:
    """Both suites on the same sample plus a translational Killing scan."""
    config = config or SuiteConfig()
    sample = sample_points(potential, config)
    points = sample[0]
    pde = pde_suite(potential, nu, config, sample)
    geo = geometry_suite(potential, nu, config, sample)
    report = pde.merge(geo)
    try:
        ks = curvature.killing_scan(potential, nu, points)
        report.stats["killing"] = {
            "field": ks.field,
            "rank": ks.rank,
            "n_points": ks.n_points,
            "null_directions": [[float(t) for t in row] for row in ks.null_directions],
        }
    except DomainError as exc:
        report.stats["killing"] = {"field": None, "rank": None, "n_points": 0, "null_directions": [], "note": str(exc)}
    return report


