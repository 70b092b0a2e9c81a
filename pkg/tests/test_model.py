import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import partmob as pm
from partmob.model import (MASS_MISMATCH, NEGATIVE_DENSITY,
                           NON_MONOTONE_MOBILITY, InvalidProblem,
                           check_problem)


def make_problem(mobility=None, external=None, interaction=None, initial=None):
    return pm.Problem(mobility or pm.power_cap_mobility(1.0),
                      pm.Potentials(external or pm.zero_potential(),
                                    interaction or pm.no_interaction()),
                      initial or pm.uniform_density(0.0, 1.0, 1.0))


def test_valid_uniform_problem_passes():
    p = make_problem()
    assert pm.validate(p) is p
    assert p.M == 1.0


def test_mass_mismatch_detected():
    bad = pm.uniform_density(0.0, 1.0, 0.98, mass=1.0)
    issues = check_problem(make_problem(initial=bad))
    assert any(i.code == MASS_MISMATCH for i in issues)
    with pytest.raises(InvalidProblem):
        pm.validate(make_problem(initial=bad))


def test_increasing_mobility_rejected():
    with pytest.raises(ValueError):
        pm.tabulated_mobility([0.0, 0.5, 1.0], [0.0, 0.5, 1.0])
    # an increasing table smuggled past the constructor is still caught
    mob = pm.power_cap_mobility(1.0)
    object.__setattr__(mob, "beta",
                       lambda s: np.minimum(np.asarray(s, dtype=float), 1.0))
    issues = check_problem(make_problem(mobility=mob))
    assert any(i.code == NON_MONOTONE_MOBILITY for i in issues)


def test_negative_density_rejected():
    init = pm.piecewise_constant_density([0.0, 1.0], [1.0])
    object.__setattr__(init, "density",
                       lambda x: np.where(np.asarray(x) < 0.5, 1.0, -1.0))
    issues = check_problem(make_problem(initial=init))
    assert any(i.code == NEGATIVE_DENSITY for i in issues)


def test_theta_trivial_values():
    p = make_problem()
    assert pm.theta(p, 0.0) == 0.0
    assert pm.theta(p, 1.0) == 0.0
    assert pm.theta(p, 0.5) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ValueError):
        pm.theta(p, -0.1)


@given(st.floats(min_value=0.0, max_value=3.0),
       st.floats(min_value=0.2, max_value=4.0),
       st.floats(min_value=1.0, max_value=3.0))
@settings(max_examples=100)
def test_theta_bounded_by_linear_growth(s, m_beta, gamma):
    mob = pm.power_cap_mobility(m_beta, gamma)
    assert 0.0 <= float(mob.theta(s)) <= mob.beta_max * s + 1e-12


@given(st.floats(min_value=0.2, max_value=4.0),
       st.floats(min_value=1.0, max_value=3.0))
@settings(max_examples=60)
def test_power_cap_monotone_and_capped(m_beta, gamma):
    mob = pm.power_cap_mobility(m_beta, gamma)
    s = np.linspace(0.0, 2.0 * mob.cap, 1000)
    b = mob.beta(s)
    assert np.all(np.diff(b) <= 1e-12)
    assert b[0] == pytest.approx(mob.beta_max)
    assert np.all(b[s >= mob.cap] == 0.0)
    assert np.all(b <= mob.beta_max)


def test_tabulated_mobility_interpolates_and_clamps():
    mob = pm.tabulated_mobility([0.0, 0.5, 1.0], [1.0, 0.4, 0.0])
    assert float(mob.beta(0.25)) == pytest.approx(0.7)
    assert float(mob.beta(-1.0)) == 1.0
    assert float(mob.beta(2.0)) == 0.0
    assert mob.cap == 1.0


def test_morse_kernel_shape():
    w = pm.morse(2.0, 1.0, 1.0, 0.5)
    x = np.linspace(-3, 3, 101)
    assert np.allclose(w.w(x), w.w(-x))           # even
    assert np.allclose(w.dw(x), -w.dw(-x))        # odd derivative
    assert w.dw(0.0) == 0.0
    # repulsive core, attractive tail
    assert float(w.w(0.0)) == pytest.approx(-2.0 + 1.0)
    assert float(w.w(4.0)) < 0.0 or abs(float(w.w(4.0))) < 1e-2


def test_newtonian_force_constant_matches_closed_form():
    p = make_problem(interaction=pm.newtonian(True),
                     external=pm.quadratic_potential(2.0))
    # sup|V''| + 2 M with M = max(1, cap) = 1
    assert p.c_force == pytest.approx(2.0 + 2.0 * p.M)


def test_step_profile_with_unaligned_jump_validates():
    # the mass quadrature must align to breakpoints, not a fixed grid
    init = pm.piecewise_constant_density([0.0, 1.0 / 3.0, 1.0], [1.2, 0.6])
    assert check_problem(make_problem(initial=init)) == []


def test_parabolic_bump_mass_and_cumulative():
    init = pm.parabolic_bump(0.75, 0.0, 1.0)
    assert init.mass == pytest.approx(1.0)
    assert float(init.cumulative(1.0)) == pytest.approx(1.0, abs=1e-14)
    assert float(init.cumulative(0.0)) == pytest.approx(0.5)
