import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.strategies import composite

import partmob as pm
from partmob.forces import continuum_force


@composite
def ordered_states(draw, n_min=2, n_max=12):
    n = draw(st.integers(min_value=n_min, max_value=n_max))
    gaps = draw(st.lists(st.floats(min_value=0.01, max_value=2.0),
                         min_size=n, max_size=n))
    x0 = draw(st.floats(min_value=-5.0, max_value=5.0))
    positions = x0 + np.concatenate([[0.0], np.cumsum(gaps)])
    h = draw(st.floats(min_value=0.05, max_value=1.0))
    return pm.ParticleState(positions, h=h)


def pairwise_oracle(state, potentials):
    # scalar double loop, written independently of the production sum
    x = state.positions
    out = np.zeros(len(x))
    for i in range(len(x)):
        total = float(potentials.external.dv(x[i]))
        for j in range(len(x)):
            if j != i:
                total += state.h * float(potentials.interaction.dw(x[i] - x[j]))
        out[i] = total
    return out


def test_no_potentials_no_force():
    s = pm.ParticleState([0.0, 0.3, 1.1], h=0.5)
    pots = pm.Potentials(pm.zero_potential(), pm.no_interaction())
    assert np.all(pm.particle_forces(s, pots).values == 0.0)


def test_attractive_rank_pattern():
    s = pm.ParticleState([-2.0, -0.7, 0.1, 0.9, 3.0], h=0.25)
    pots = pm.Potentials(pm.zero_potential(), pm.newtonian(True))
    h = s.h
    expected = np.array([-4 * h, -2 * h, 0.0, 2 * h, 4 * h])
    assert np.allclose(pm.particle_forces(s, pots).values, expected,
                       atol=1e-14)
    assert np.allclose(pm.newtonian_forces_fast(s, pots).values, expected,
                       atol=1e-14)


def test_repulsive_with_quadratic_well():
    s = pm.ParticleState([-1.0, 0.0, 1.0], h=1.0)
    pots = pm.Potentials(pm.quadratic_potential(1.0), pm.newtonian(False))
    expected = np.array([1.0, 0.0, -1.0])
    assert np.allclose(pm.particle_forces(s, pots).values, expected,
                       atol=1e-12)
    assert np.allclose(pairwise_oracle(s, pots), expected, atol=1e-12)


def test_split_identities():
    s = pm.ParticleState([-1.0, -0.2, 0.4, 2.0], h=0.3)
    pots = pm.Potentials(pm.linear_potential(0.7), pm.newtonian(False))
    f = pm.particle_forces(s, pots)
    assert np.all(f.positive >= 0.0)
    assert np.all(f.negative <= 0.0)
    assert np.all(f.positive + f.negative == f.values)
    assert np.all(f.positive * f.negative == 0.0)


@given(ordered_states(), st.booleans())
@settings(max_examples=150, deadline=None)
def test_fast_matches_direct(state, attractive):
    pots = pm.Potentials(pm.quadratic_potential(0.5),
                         pm.newtonian(attractive))
    direct = pm.particle_forces(state, pots).values
    fast = pm.newtonian_forces_fast(state, pots).values
    assert np.allclose(direct, fast, atol=1e-12, rtol=0.0)
    assert np.allclose(direct, pairwise_oracle(state, pots), atol=1e-12)


def test_second_difference_vanishes_for_newtonian_part():
    state = pm.ParticleState(np.sort(np.random.default_rng(3).uniform(-2, 2, 9)),
                             h=0.2)
    pots = pm.Potentials(pm.zero_potential(), pm.newtonian(True))
    f = pm.particle_forces(state, pots).values
    second = f[2:] - 2 * f[1:-1] + f[:-2]
    assert np.allclose(second, 0.0, atol=1e-13)


def test_neighbour_difference_bound_along_trajectory(attractive_problem,
                                                     short_attractive_run):
    traj, _ = short_attractive_run
    c_f = attractive_problem.c_force
    for k in range(0, len(traj.times), 10):
        state = traj.state_at(k)
        f = pm.forces_for(state, attractive_problem).values
        widths = state.widths()
        assert np.all(np.abs(np.diff(f)) <= c_f * widths + 1e-12)
        second = np.abs(f[2:] - 2 * f[1:-1] + f[:-2])
        bound = c_f * (widths[1:] ** 2 + widths[:-1] ** 2
                       + np.abs(widths[1:] - widths[:-1]))
        assert np.all(second <= bound + 1e-12)


# -- continuum force -------------------------------------------------------

def test_continuum_force_no_kernel():
    pots = pm.Potentials(pm.quadratic_potential(2.0), pm.no_interaction())
    f, df = continuum_force(np.array([0.0, 1.0]), np.array([1.0]), 1.0,
                            pots, [0.3])
    assert f[0] == pytest.approx(0.6)
    assert df[0] == pytest.approx(2.0)


def quadrature_oracle(edges, rho, xq, kernel_d, n=400000):
    # brute-force trapezoid of the convolution integral
    y = np.linspace(edges[0], edges[-1], n)
    idx = np.clip(np.searchsorted(edges, y, side="right") - 1, 0, len(rho) - 1)
    dens = np.where((y >= edges[0]) & (y < edges[-1]), rho[idx], 0.0)
    return np.trapezoid(kernel_d(xq - y) * dens, y)


def test_continuum_force_newtonian_half_mass():
    pots = pm.Potentials(pm.zero_potential(), pm.newtonian(True))
    edges, rho = np.array([0.0, 2.0]), np.array([1.0])
    f, df = continuum_force(edges, rho, 2.0, pots, [1.0, 0.5])
    assert f[0] == pytest.approx(0.0, abs=1e-14)       # half the mass each side
    assert f[1] == pytest.approx(-1.0, abs=1e-14)
    assert df[0] == pytest.approx(2.0)
    oracle = quadrature_oracle(edges, rho, 0.5, lambda d: np.sign(d))
    assert f[1] == pytest.approx(oracle, abs=1e-5)


def test_continuum_force_morse_matches_quadrature():
    w = pm.morse(1.0, 0.8, 0.5, 0.3)
    pots = pm.Potentials(pm.zero_potential(), w)
    edges = np.array([-1.0, 0.0, 0.5, 1.0])
    rho = np.array([0.5, 1.0, 0.25])
    for xq in (-0.4, 0.2, 0.75, 1.5):
        f, _ = continuum_force(edges, rho, None or 1.0, pots, [xq])
        oracle = quadrature_oracle(edges, rho, xq, w.dw)
        assert f[0] == pytest.approx(oracle, abs=2e-5)


def test_exclude_own_cell_drops_local_contribution():
    pots = pm.Potentials(pm.zero_potential(), pm.newtonian(True))
    edges, rho = np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0])
    x = [0.25]
    full, dfull = continuum_force(edges, rho, 2.0, pots, x)
    part, dpart = continuum_force(edges, rho, 2.0, pots, x,
                                  exclude_own_cell=True)
    # removing the own cell cancels the local density gradient
    assert dpart[0] == pytest.approx(dfull[0] - 2.0)
    inside = quadrature_oracle(edges[:2], rho[:1], 0.25, lambda d: np.sign(d))
    assert part[0] == pytest.approx(full[0] - inside, abs=1e-5)
