import numpy as np
import pytest
from hypothesis import given, strategies as st

from hkcma.errors import DomainError
from hkcma.expsum import conjugation_check, evaluate
from hkcma.spectrum import (Mode, SingularFamily, SpectrumData, expand, is_solution, mode_s,
                            singular_family, term_residuals)
from oracles import direct_scale, v_direct

alphas = st.builds(lambda r, t: r * np.exp(1j * t), st.floats(1, 3), st.floats(0, 2 * np.pi))
amps = st.builds(complex, st.floats(-2, 2), st.floats(-2, 2))


def test_mode_s_values():
    assert mode_s(1) == 0.0
    assert mode_s(2) == pytest.approx(np.sqrt(3) / 2)
    with pytest.raises(DomainError):
        mode_s(0.5)


def test_alpha1_F_only_exponents():
    pot = expand(SpectrumData(0.0, (Mode(1, 1, 0),)))
    rows = sorted((t.lp.real, t.lq.real, t.l2, t.lw) for t in pot.terms)
    assert rows == [(-1.0, 1.0, -2j, 2j), (1.0, -1.0, -2j, 2j)]


def test_alpha2_F_branch_lp():
    pot = expand(SpectrumData(0.0, (Mode(2, 1, 0),)))
    assert max(t.lp.real for t in pot.terms) == pytest.approx(2 * (np.sqrt(3) / 2 + 1), rel=1e-15)
    assert max(t.lp.real for t in pot.terms) == pytest.approx(3.7320508075688772, rel=1e-15)


def test_G_only_uses_one_minus_s():
    a = 2.0
    s = np.sqrt(3) / 2
    pot = expand(SpectrumData(0.0, (Mode(a, 0, 1),)))
    assert sorted(t.lp.real for t in pot.terms) == pytest.approx(sorted([a * (1 - s), -a * (1 + s)]))


def test_equal_alphas_merge():
    sp = SpectrumData(0.0, (Mode(2, 1, 0), Mode(2, 0.5, 1)))
    assert len(sp.modes) == 1 and sp.modes[0].F == 1.5 and sp.modes[0].G == 1


def test_empty_spectrum_rejected():
    with pytest.raises(DomainError):
        SpectrumData(0.0, ())


@given(st.lists(st.tuples(alphas, amps, amps), min_size=1, max_size=4), st.floats(-2, 2))
def test_every_term_solves_linear_system(modes, nu):
    pot = expand(SpectrumData(nu, tuple(Mode(*m) for m in modes)))
    assert conjugation_check(pot)
    for t in pot.terms:
        assert max(abs(r) for r in term_residuals(t, nu)) <= 1e-12 * (1 + abs(t.lp) ** 2 + abs(t.l2) ** 2)


@given(alphas, amps, amps, st.floats(-2, 2),
       st.tuples(*[st.floats(-1, 1)] * 4))
def test_expansion_matches_direct_formula(alpha, F, G, nu, x):
    modes = [(alpha, F, G)]
    pot = expand(SpectrumData(nu, (Mode(alpha, F, G),)))
    scale = direct_scale(modes, nu, x)
    assert abs(evaluate(pot, x) - v_direct(modes, nu, x)) <= 1e-10 * scale + 1e-300


def test_perturbed_exponent_is_not_a_solution():
    pot = expand(SpectrumData(0.0, (Mode(2, 1, 1),)))
    from hkcma.expsum import ExpSumPotential, ExpTerm
    bad = [ExpTerm(t.amplitude, t.lp + 1e-2, t.lq, t.l2, t.lw) for t in pot.terms]
    rep = is_solution(ExpSumPotential(bad), 0.0)
    assert not rep.passed and rep.worst_residual > 1e-3


def test_singular_family_parameters():
    fam = SingularFamily(2.0, 1.0, 0.5)
    assert fam.lam == pytest.approx(-1.0)
    assert fam.mu == pytest.approx(0.5 - 2j * 2 * np.sqrt(3) / 2)
    assert is_solution(singular_family(fam), 0.5)
