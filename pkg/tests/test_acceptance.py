"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records one PASS/FAIL line, printed together at the end of the
pytest run.
"""
import json

import numpy as np
import pytest

from hkcma import cli, curvature, geometry, verify
from hkcma.errors import HKError
from hkcma.expsum import ExpSumPotential, ExpTerm, as_point, evaluate, jet
from hkcma.jets import fd_oracle
from hkcma.spectrum import (RESIDUAL_NAMES, Mode, SingularFamily, SpectrumData, expand, singular_family,
                            term_residuals)
from conftest import TWO_MODE
from oracles import direct_scale, random_spectrum, v_direct

SINGULAR_FAMILIES = [SingularFamily(1.0, 1.0, 0.0), SingularFamily(1.5, 1.0, 0.3),
                     SingularFamily(1.2 + 0.9j, 0.4 - 0.7j, -1.1), SingularFamily(-2.0 + 0.5j, 2.0j, 1.7)]


def _spectrum(modes, nu):
    return SpectrumData(nu, tuple(Mode(a, F, G) for a, F, G in modes))


def _perturbed(pot, shift=1e-2):
    t = pot.terms[0]
    moved = ExpTerm(t.amplitude, t.lp + shift, t.lq, t.l2, t.lw)
    rest = [u for u in pot.terms if u not in (t, t.partner())]
    return ExpSumPotential(rest + [moved, moved.partner()])


@pytest.fixture(scope="module")
def reference_report():
    pot = expand(TWO_MODE)
    config = verify.SuiteConfig()
    sample = verify.sample_points(pot, config)
    return (verify.pde_suite(pot, TWO_MODE.nu, config, sample),
            verify.geometry_suite(pot, TWO_MODE.nu, config, sample), sample)


def test_criterion_1_per_term_algebra(criterion):
    rng = np.random.default_rng(20240601)
    worst, n_terms = 0.0, 0
    for _ in range(100):
        modes, nu = random_spectrum(rng)
        for t in expand(_spectrum(modes, nu)).terms:
            worst = max(worst, max(abs(r) for r in term_residuals(t, nu)))
            n_terms += 1
    ok = worst <= 1e-12
    assert criterion(1, ok, f"100 spectra, {n_terms} terms, worst of {len(RESIDUAL_NAMES)} residuals {worst:.2e} <= 1e-12")


def test_criterion_2_expansion_fidelity(criterion):
    rng = np.random.default_rng(20240602)
    worst = 0.0
    for _ in range(100):
        modes, nu = random_spectrum(rng)
        pot = expand(_spectrum(modes, nu))
        for x in rng.uniform(-1, 1, (100, 4)):
            rel = abs(evaluate(pot, x) - v_direct(modes, nu, x)) / direct_scale(modes, nu, x)
            worst = max(worst, rel)
    ok = worst <= 1e-10
    assert criterion(2, ok, f"100 spectra x 100 points, worst relative deviation {worst:.2e} <= 1e-10")


def test_criterion_3_partner_system(criterion, reference_report):
    pde = reference_report[0]
    checks = [pde.check(n) for n in verify.PDE_CHECKS]
    worst = max(c.worst_residual for c in checks)
    ok = all(c.passed and c.n_points == 200 and c.tolerance <= 1e-8 for c in checks)
    assert criterion(3, ok, f"{len(checks)} residual families on 200 points, worst {worst:.2e} <= 1e-8")


def test_criterion_4_geometry(criterion, reference_report):
    geo = reference_report[1]
    names = {"np_reconstruction": 1e-10, "signature": 0.0, "kahler_reality": 1e-10, "kahler_orthonormality": 1e-10}
    checks = {n: geo.check(n) for n in names}
    ok = all(c.passed and c.tolerance <= names[n] and c.n_points > 0 for n, c in checks.items())
    detail = ", ".join(f"{n} {c.worst_residual:.1e} (n={c.n_points})" for n, c in checks.items())
    assert criterion(4, ok, detail)


def test_criterion_5_curvature(criterion, reference_report):
    geo = reference_report[1]
    stated = {"riemann_symmetry": 1e-9, "ricci_ratio": 1e-6, "asd": 1e-6, "closedness": 1e-6,
              "hitchin_saturation": 1e-6}
    checks = {n: geo.check(n) for n in stated}
    n_curv = min(c.n_points for c in checks.values())
    ok = all(c.passed and c.tolerance <= stated[n] for n, c in checks.items()) and n_curv >= 50
    bad = verify.geometry_suite(_perturbed(expand(TWO_MODE)), TWO_MODE.nu, verify.SuiteConfig(),
                                reference_report[2])
    control = bad.check("asd").worst_residual
    ok = ok and control > 1e-3
    detail = ", ".join(f"{n} {c.worst_residual:.1e}" for n, c in checks.items())
    assert criterion(5, ok, f"{detail} at {n_curv} points; negative control asd {control:.2e} > 1e-3")


def test_criterion_6_oracle_equivalence(criterion, reference_report):
    """Exact jets against central differences with step 1e-4, as stated.

    Central differences carry an O(h^2) truncation error proportional to
    third and fourth derivatives of the metric, which are large next to the
    singular locus and where exponents reach ~15.  The Richardson column
    shows the same comparison with that leading error removed.
    """
    pot, nu = expand(TWO_MODE), TWO_MODE.nu
    h = 1e-4
    worst = {"grad": 0.0, "hess": 0.0, "riemann": 0.0}
    rich = {"grad": 0.0, "hess": 0.0, "riemann": 0.0}
    n = 0
    for x in reference_report[2][0]:
        try:
            mj = geometry.metric_jet(pot, nu, x)
            if geometry.singular_locus_value(jet(pot, as_point(x), 1), nu) <= 0:
                continue
            g1, h1 = fd_oracle(lambda y: geometry.metric_at(pot, nu, y).matrix, x, h)
            g2, h2 = fd_oracle(lambda y: geometry.metric_at(pot, nu, y).matrix, x, 2 * h)
            gam = lambda y: curvature.christoffel(geometry.metric_jet(pot, nu, y))[0]  # noqa: E731
            d1, _ = fd_oracle(gam, x, h)
            d2, _ = fd_oracle(gam, x, 2 * h)
        except HKError:
            continue
        n += 1
        Gamma, dGamma = curvature.christoffel(mj)
        R = curvature.riemann_from_christoffel(Gamma, dGamma)

        def rel_r(d):
            return np.linalg.norm(curvature.riemann_from_christoffel(Gamma, d) - R) / np.linalg.norm(R)

        pairs = (("grad", g1, g2, mj.dg), ("hess", h1, h2, mj.ddg))
        for key, a, b, exact in pairs:
            worst[key] = max(worst[key], np.linalg.norm(a - exact) / np.linalg.norm(exact))
            rich[key] = max(rich[key], np.linalg.norm((4 * a - b) / 3 - exact) / np.linalg.norm(exact))
        worst["riemann"] = max(worst["riemann"], rel_r(d1))
        rich["riemann"] = max(rich["riemann"], rel_r((4 * d1 - d2) / 3))
    ok = n > 0 and worst["grad"] <= 1e-6 and worst["hess"] <= 1e-6 and worst["riemann"] <= 1e-5
    detail = (f"{n} points, step 1e-4: grad {worst['grad']:.1e}, hess {worst['hess']:.1e} (<= 1e-6), "
              f"riemann {worst['riemann']:.1e} (<= 1e-5); Richardson: grad {rich['grad']:.1e}, "
              f"hess {rich['hess']:.1e}, riemann {rich['riemann']:.1e}")
    assert criterion(6, ok, detail)


def test_criterion_7_singularity(criterion, reference_report):
    axis = np.linspace(-1, 1, 5)
    grid = np.array(np.meshgrid(axis, axis, axis, axis, indexing="ij")).reshape(4, -1).T
    worst_eq, worst_locus, pde_ok = 0.0, 0.0, True
    for fam in SINGULAR_FAMILIES:
        pot = singular_family(fam)
        for x in grid:
            vj = jet(pot, as_point(x), 1)
            worst_eq = max(worst_eq, abs(geometry.singularity_residual(vj, fam.nu))
                           / geometry.singularity_scale(vj, fam.nu))
            worst_locus = max(worst_locus, abs(geometry.singular_locus_value(vj, fam.nu))
                              / geometry.abc(vj, fam.nu).c ** 2)
        pde = verify.pde_suite(pot, fam.nu, verify.SuiteConfig())
        pde_ok = pde_ok and pde.passed
    ok = worst_eq <= 1e-10 and worst_locus <= 1e-10 and pde_ok
    # reported threshold, not hard-failed
    fractions = [reference_report[1].stats["singular_locus"]["fraction_bounded_away"]]
    rng = np.random.default_rng(20240607)
    for _ in range(3):
        modes = [(rng.uniform(1, 3) * np.exp(1j * rng.uniform(0, 2 * np.pi)), 1, 1) for _ in range(2)]
        spec = _spectrum(modes, float(rng.uniform(-1, 1)))
        rep = verify.geometry_suite(expand(spec), spec.nu, verify.SuiteConfig(n_points=100))
        fractions.append(rep.stats["singular_locus"]["fraction_bounded_away"])
    thr = verify.DEFAULT_GUARDS["bounded_away_rel"]
    detail = (f"{len(SINGULAR_FAMILIES)} families on 5^4 grid: singularity equation {worst_eq:.1e}, "
              f"c^2-|a|^2 {worst_locus:.1e} (<= 1e-10), pde_suite {'passes' if pde_ok else 'fails'}; "
              f"two-mode fraction with |D| > {thr:g} c^2: " + ", ".join(f"{f:.1%}" for f in fractions)
              + (" (>= 95%)" if min(fractions) >= 0.95 else " (below 95%, reported only)"))
    assert criterion(7, ok, detail)


def test_criterion_8_symmetry_reduction(criterion):
    pts = np.random.default_rng(20240608).uniform(-1, 1, (200, 4))
    two = curvature.killing_scan(expand(TWO_MODE), TWO_MODE.nu, pts)
    ok = two.field == "metric" and two.rank == 4 and len(two.null_directions) == 0
    rng = np.random.default_rng(20240609)
    f_only, one_term = [], []
    for _ in range(5):
        alpha = rng.uniform(1, 3) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        F, G = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        nu = float(rng.uniform(-2, 2))
        f_only.append(curvature.killing_scan(expand(_spectrum([(alpha, F, 0)], nu)), nu, pts))
        one_term.append(curvature.killing_scan(expand(_spectrum([(alpha, F, G)], nu)), nu, pts))
    ok = ok and all(k.rank <= 3 and len(k.null_directions) >= 1 for k in f_only)
    ok = ok and all(k.field == "metric" and k.rank == 3 and len(k.null_directions) == 1 for k in one_term)
    t = ExpTerm(0.7, 1.3, 0.4, 0.5, 0.5)
    u = ExpTerm(0.2 + 0.1j, -0.6 + 0.2j, 0.9, -0.3, -0.3)
    flat4 = curvature.killing_scan(ExpSumPotential([t, t.partner(), u, u.partner()]), 0.0, pts, field="log_gradient")
    e4 = len(flat4.null_directions) == 1 and np.allclose(np.abs(flat4.null_directions[0]), [0, 0, 0, 1], atol=1e-8)
    ok = ok and e4
    detail = (f"two-mode rank {two.rank}, {len(two.null_directions)} null; "
              f"one-mode F-only ({f_only[0].field}) ranks {[k.rank for k in f_only]}, "
              f"null dims {[len(k.null_directions) for k in f_only]}; "
              f"one-mode F+G metric ranks {[k.rank for k in one_term]}; x4-independent recovers e4: {e4}")
    assert criterion(8, ok, detail)


def test_criterion_9_cli(criterion, tmp_path, capsys):
    import io

    two = tmp_path / "two.json"
    two.write_text(json.dumps(cli.spectrum_to_doc(TWO_MODE)))
    fam = SINGULAR_FAMILIES[1]
    sing = tmp_path / "sing.json"
    sing.write_text(json.dumps(cli.spectrum_to_doc(SpectrumData(fam.nu, (Mode(fam.alpha, fam.F, 0),)))))
    bad = tmp_path / "bad.json"
    bad.write_text('{"nu": 0, "modes": [{"alpha": {"re": 0.5, "im": 0}}]}')

    def run(*argv):
        out = io.StringIO()
        return cli.main([str(a) for a in argv], out=out), out.getvalue()

    codes = {
        "validate two": (run("validate", two)[0], 0),
        "verify two": (run("verify", two, "--report", tmp_path / "a.json")[0], 0),
        "verify singular": (run("verify", sing, "--report", tmp_path / "s.json")[0], 1),
        "bad alpha": (run("validate", bad)[0], 2),
        "bad box": (run("verify", two, "--box", "1,-1")[0], 2),
        "near-locus metric": (run("metric", sing, "--at", "0.1,0.2,0.3,0.4")[0], 1),
    }
    codes_ok = all(got == want for got, want in codes.values())
    round_trip = True
    for name in ("a.json", "s.json"):
        text = (tmp_path / name).read_text()
        round_trip = round_trip and cli.emit_report(cli.parse_report(text)) == text
        round_trip = round_trip and cli.parse_report(text).to_dict() == json.loads(text)
    first = run("verify", two, "--report", tmp_path / "b.json")
    deterministic = first == run("verify", two, "--report", tmp_path / "c.json")
    deterministic = deterministic and (tmp_path / "b.json").read_bytes() == (tmp_path / "c.json").read_bytes()
    deterministic = deterministic and (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    capsys.readouterr()
    ok = codes_ok and round_trip and deterministic
    detail = (f"exit codes {'match' if codes_ok else 'differ: ' + str(codes)}, "
              f"report round-trip {round_trip}, deterministic output {deterministic}")
    assert criterion(9, ok, detail)
