import numpy as np
import pytest

from hkcma import curvature, geometry
from hkcma.curvature import (EPS4, christoffel, hodge_star, killing_scan, riemann,
                             riemann_from_christoffel, wedge_coefficient)
from hkcma.errors import DomainError
from hkcma.expsum import ExpSumPotential, ExpTerm
from hkcma.geometry import MetricJet
from hkcma.jets import fd_oracle
from hkcma.spectrum import Mode, SpectrumData, expand
from oracles import toy_polar_metric

# frozen from the independent 50-digit oracle: R_abcd R^abcd at (0.3, 0.5, 0.1, 0.2)
ORACLE_KRETSCHMANN = 52703.741150525042415
# a point where v is 2400x smaller than its largest terms; oracle K at 60 digits, Ricci^2 ~ 1e-30
CANCELLATION_POINT = [0.9591934608966346, 0.8831826057118355, -0.5386656353977952, 0.9398151471643426]
CANCELLATION_KRETSCHMANN = 221.75623281898725661


def test_toy_polar_christoffel():
    x = [1.7, 0.4]
    Gamma, dGamma = christoffel(MetricJet(*toy_polar_metric(x)))
    assert Gamma[1, 0, 1] == pytest.approx(1 / x[0])
    assert Gamma[1, 1, 0] == pytest.approx(1 / x[0])
    assert Gamma[0, 1, 1] == pytest.approx(-x[0])
    # flat plane in polar coordinates
    assert np.allclose(riemann_from_christoffel(Gamma, dGamma), 0, atol=1e-14)


def test_flat_metric_has_zero_curvature():
    mj = MetricJet(np.diag([1.0, 2, 3, 4]), np.zeros((4, 4, 4)), np.zeros((4, 4, 4, 4)))
    pack = curvature.curvature_from_metric_jet(mj)
    assert pack.flat and pack.asd_residual == 0.0
    dens = curvature.densities_from_pack(pack)
    assert dens.chi_density == 0 and dens.tau_density == 0


def test_hodge_star_euclidean():
    F = np.zeros((4, 4))
    F[0, 1], F[1, 0] = 1, -1
    S = hodge_star(F, np.eye(4))
    assert S[2, 3] == pytest.approx(1) and S[3, 2] == pytest.approx(-1)
    assert np.allclose(hodge_star(S, np.eye(4)), F)
    # star is metric-aware: scaling the metric leaves * on 2-forms invariant in 4D
    assert np.allclose(hodge_star(F, 4 * np.eye(4)), S)
    assert wedge_coefficient(F, S, np.eye(4)) == pytest.approx(1.0)
    assert EPS4[0, 1, 2, 3] == 1 and EPS4[1, 0, 2, 3] == -1


def test_kretschmann_matches_oracle(two_mode):
    pot, nu = two_mode
    pack = riemann(pot, nu, [0.3, 0.5, 0.1, 0.2])
    assert pack.riemann_norm ** 2 == pytest.approx(ORACLE_KRETSCHMANN, rel=1e-9)
    assert pack.ricci_ratio < 1e-10
    # chart tensor and frame tensor describe the same curvature
    g = pack.metric
    gi = np.linalg.inv(g)
    K = np.einsum("abcd,ai,bj,ck,dl,ijkl->", pack.riemann, gi, gi, gi, gi, pack.riemann)
    assert K == pytest.approx(ORACLE_KRETSCHMANN, rel=1e-6)


def test_coframe_curvature_matches_metric_jet_path(two_mode, valid_points):
    pot, nu = two_mode
    for x in valid_points:
        p = riemann(pot, nu, x, orientation_sign=-1)
        q = curvature.curvature_from_metric_jet(geometry.metric_jet(pot, nu, x, extended=True), -1)
        assert np.abs(p.riemann - q.riemann).max() <= 1e-8 * np.abs(q.riemann).max()
        assert p.riemann_norm == pytest.approx(q.riemann_norm, rel=1e-8)


def test_rounding_estimate_separates_resolved_and_cancelling_points(two_mode):
    pot, nu = two_mode
    good = riemann(pot, nu, [0.3, 0.5, 0.1, 0.2])
    bad = riemann(pot, nu, CANCELLATION_POINT)
    assert good.rounding_estimate < 1e-12
    assert bad.rounding_estimate > 1e-7
    # the estimate bounds the observed defect to within an order of magnitude
    assert bad.ricci_ratio < 10 * bad.rounding_estimate
    assert bad.riemann_norm ** 2 == pytest.approx(CANCELLATION_KRETSCHMANN, rel=1e-5)


def test_curvature_at_valid_points(two_mode, valid_points):
    pot, nu = two_mode
    signs = set()
    for x in valid_points:
        pack = riemann(pot, nu, x)
        signs.add(pack.orientation_sign)
        assert max(pack.symmetry.values()) <= 1e-9
        assert pack.ricci_ratio <= 1e-6
        assert pack.asd_residual <= 1e-6
        assert not pack.flat
        assert curvature.densities_from_pack(pack).saturation_residual <= 1e-6
        assert max(curvature.closedness_residual(pot, nu, x)) <= 1e-6
    assert len(signs) == 1


def _richardson(field, x, step):
    """Central differences at step and 2*step, extrapolated; plus both raw estimates."""
    g1, h1 = fd_oracle(field, x, step)
    g2, h2 = fd_oracle(field, x, 2 * step)
    return (4 * g1 - g2) / 3, (4 * h1 - h2) / 3, (g1, g2), (h1, h2)


def test_riemann_jet_vs_finite_difference_of_christoffel(two_mode, valid_points):
    pot, nu = two_mode

    def gamma(x):
        return christoffel(geometry.metric_jet(pot, nu, x))[0]

    for x0 in valid_points[:6]:
        Gamma, dGamma = christoffel(geometry.metric_jet(pot, nu, x0))
        R_jet = riemann_from_christoffel(Gamma, dGamma)
        d_rich, _, (d1, d2), _ = _richardson(gamma, x0, 1e-4)
        err1 = np.linalg.norm(riemann_from_christoffel(Gamma, d1) - R_jet)
        err2 = np.linalg.norm(riemann_from_christoffel(Gamma, d2) - R_jet)
        err_r = np.linalg.norm(riemann_from_christoffel(Gamma, d_rich) - R_jet)
        # the difference to the jet is the O(h^2) truncation error of the oracle
        assert err_r <= 1e-5 * np.linalg.norm(R_jet) or err2 / err1 == pytest.approx(4, rel=0.2)


def test_metric_jet_vs_finite_differences(two_mode, valid_points):
    pot, nu = two_mode

    def metric(y):
        return geometry.metric_at(pot, nu, y).matrix

    for x in valid_points[:6]:
        mj = geometry.metric_jet(pot, nu, x)
        g_r, h_r, (g1, g2), (h1, h2) = _richardson(metric, x, 1e-4)
        assert np.linalg.norm(g_r - mj.dg) <= 1e-6 * np.linalg.norm(mj.dg)
        assert np.linalg.norm(h_r - mj.ddg) <= 1e-5 * np.linalg.norm(mj.ddg)
        # raw central differences converge to the jet at second order
        e1, e2 = np.linalg.norm(g1 - mj.dg), np.linalg.norm(g2 - mj.dg)
        assert e2 / e1 == pytest.approx(4, rel=0.05)


def test_negative_control_perturbed_exponent(two_mode, valid_points):
    pot, nu = two_mode
    # shift an exponent and its partner consistently so v stays real
    t = pot.terms[0]
    shifted = [ExpTerm(t.amplitude, t.lp + 1e-2, t.lq, t.l2, t.lw)]
    shifted.append(shifted[0].partner())
    rest = [u for u in pot.terms if u not in (t, t.partner())]
    bad = ExpSumPotential(rest + shifted)
    worst = 0.0
    for x in valid_points:
        try:
            worst = max(worst, riemann(bad, nu, x, orientation_sign=-1).asd_residual)
        except DomainError:
            continue
    assert worst > 1e-3


def test_killing_scan_ranks(two_mode):
    pot, nu = two_mode
    pts = np.random.default_rng(5).uniform(-1, 1, (80, 4))
    ks = killing_scan(pot, nu, pts)
    assert ks.rank == 4 and len(ks.null_directions) == 0
    one = expand(SpectrumData(0.0, (Mode(1.3, 1, 0.5),)))
    ks1 = killing_scan(one, 0.0, pts)
    assert ks1.field == "metric" and ks1.rank == 3
    assert np.allclose(np.abs(ks1.null_directions[0]), [0, 0, 0, 1], atol=1e-8)


def test_killing_scan_recovers_e4_for_x4_independent_potential():
    # exponents with no x4 dependence: l2 = lw real-symmetric so Im z2 drops out
    t = ExpTerm(0.7, 1.3, 0.4, 0.5, 0.5)
    u = ExpTerm(0.2 + 0.1j, -0.6 + 0.2j, 0.9, -0.3, -0.3)
    pot = ExpSumPotential([t, t.partner(), u, u.partner()])
    pts = np.random.default_rng(2).uniform(-1, 1, (60, 4))
    ks = killing_scan(pot, 0.0, pts, field="log_gradient")
    assert ks.rank == 3
    assert np.allclose(np.abs(ks.null_directions[0]), [0, 0, 0, 1], atol=1e-8)


def test_killing_scan_needs_points(singular):
    pot, nu = singular
    with pytest.raises(DomainError):
        killing_scan(pot, nu, np.zeros((3, 4)), field="metric")
    ks = killing_scan(pot, nu, np.random.default_rng(1).uniform(-1, 1, (40, 4)))
    assert ks.field == "log_gradient" and ks.rank <= 3 and len(ks.null_directions) >= 1
