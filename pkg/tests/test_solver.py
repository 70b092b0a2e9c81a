import numpy as np
import pytest

import partmob as pm
from partmob.solver import StepUnderflow


def upwind_oracle(positions, h, problem):
    # scalar re-derivation of the velocity rule, independent of the
    # vectorised production path
    positions = np.asarray(positions, dtype=float)
    n = len(positions) - 1
    rho = [h / (positions[i + 1] - positions[i]) for i in range(n)]
    beta = lambda s: float(problem.mobility.beta(s))
    f = pm.particle_forces(pm.ParticleState(positions, h=h),
                           problem.potentials).values
    out = np.zeros(n + 1)
    for i in range(n + 1):
        left = rho[i - 1] if i - 1 >= 0 else 0.0
        right = rho[i] if i < n else 0.0
        fp, fm = max(f[i], 0.0), min(f[i], 0.0)
        out[i] = -beta(right) * fm - beta(left) * fp
    return out


def make_problem(external, interaction):
    return pm.Problem(pm.power_cap_mobility(1.0),
                      pm.Potentials(external, interaction),
                      pm.parabolic_bump())


def test_zero_field_is_static():
    p = make_problem(pm.zero_potential(), pm.no_interaction())
    s = pm.quantile_partition(p.initial, 10)
    assert np.all(pm.rhs(s, p) == 0.0)
    traj = pm.integrate(s, p, 0.5, dt=0.05)
    assert np.allclose(traj.positions, traj.positions[0], atol=1e-15)


def test_capped_interior_is_frozen():
    # both neighbouring cells at the cap: the interior particle cannot move
    p = make_problem(pm.quadratic_potential(3.0), pm.no_interaction())
    s = pm.ParticleState([0.0, 1.0, 2.0], h=1.0)  # densities exactly 1
    v = pm.rhs(s, p)
    assert v[1] == 0.0


def test_upwind_rule_matches_hand_example():
    p = make_problem(pm.quadratic_potential(1.0), pm.newtonian(False))
    s = pm.ParticleState([-1.0, 0.0, 1.0], h=1.0)
    v = pm.rhs(s, p)
    assert np.allclose(v, [-1.0, 0.0, 1.0], atol=1e-14)
    assert np.allclose(v, upwind_oracle(s.positions, 1.0, p), atol=1e-14)


def test_single_cell_translation():
    # forces are constantly -1; only the right endpoint sees vacuum beta
    p = pm.Problem(pm.power_cap_mobility(1.0),
                   pm.Potentials(pm.linear_potential(-1.0),
                                 pm.no_interaction()),
                   pm.uniform_density(0.0, 1.0, 1.0))
    s = pm.ParticleState([0.0, 1.0], h=1.0)
    v = pm.rhs(s, p)
    assert np.allclose(v, [0.0, 1.0], atol=1e-14)
    assert np.allclose(v, upwind_oracle(s.positions, 1.0, p), atol=1e-14)


def test_oracle_agrees_on_random_states(attractive_problem):
    rng = np.random.default_rng(7)
    for _ in range(25):
        positions = np.sort(rng.uniform(-2, 2, 12))
        positions += np.arange(12) * 1e-3  # enforce distinctness
        h = 0.15
        s = pm.ParticleState(positions, h=h)
        assert np.allclose(pm.rhs(s, attractive_problem),
                           upwind_oracle(positions, h, attractive_problem),
                           atol=1e-13)


def test_ordering_and_velocity_bound(attractive_problem, short_attractive_run):
    traj, _ = short_attractive_run
    assert np.all(traj.widths() > 0.0)
    beta_max = attractive_problem.mobility.beta_max
    for k in range(len(traj.times)):
        f = pm.forces_for(traj.state_at(k), attractive_problem).values
        assert np.max(np.abs(traj.velocities[k])) <= \
            beta_max * np.max(np.abs(f)) + 1e-13


def test_cell_lower_bound_report(attractive_problem, short_attractive_run):
    traj, _ = short_attractive_run
    report = pm.check_cell_bounds(traj, attractive_problem)
    assert report.lower_bound_ok
    assert report.max_width_ratio is None  # bump touches zero at the edges


def test_upper_bound_report_for_uniform_data():
    p = pm.Problem(pm.power_cap_mobility(1.0),
                   pm.Potentials(pm.zero_potential(), pm.no_interaction()),
                   pm.uniform_density(0.0, 1.0, 1.0))
    s = pm.quantile_partition(p.initial, 8)
    traj = pm.integrate(s, p, 0.3, dt=0.05)
    report = pm.check_cell_bounds(traj, p)
    assert report.min_width_ratio == pytest.approx(1.0)
    assert report.max_width_ratio == pytest.approx(1.0)
    assert report.max_width_ratio <= report.growth_bound * (1.0 + 1e-9)


def test_rk4_step_count_and_storage(attractive_problem):
    s = pm.quantile_partition(attractive_problem.initial, 20)
    traj = pm.integrate(s, attractive_problem, 0.1, dt=1e-2, store_every=5)
    assert np.allclose(traj.times, [0.0, 0.05, 0.1])


def test_rk45_reaches_end(attractive_problem):
    s = pm.quantile_partition(attractive_problem.initial, 20)
    traj = pm.integrate(s, attractive_problem, 0.2, scheme="rk45", tol=1e-9)
    assert traj.times[-1] == pytest.approx(0.2)
    ref = pm.integrate(s, attractive_problem, 0.2, dt=1e-3)
    assert np.allclose(traj.positions[-1], ref.positions[-1], atol=1e-6)


def test_rk45_tolerance_validated(attractive_problem):
    s = pm.quantile_partition(attractive_problem.initial, 10)
    with pytest.raises(ValueError):
        pm.integrate(s, attractive_problem, 0.1, scheme="rk45", tol=1.0)


def test_integrator_order_on_energy_balance(attractive_problem):
    # fourth-order scheme: the balance defect should drop ~16x per halving
    p = attractive_problem
    s = pm.quantile_partition(p.initial, 30)
    residuals = [pm.edb_residual(pm.integrate(s, p, 0.5, dt=dt))
                 for dt in (4e-3, 2e-3, 1e-3)]
    orders = np.log2(np.array(residuals[:-1]) / np.array(residuals[1:]))
    assert np.all(orders >= 3.5)


def test_support_growth_is_bounded(repulsive_free_problem):
    p = repulsive_free_problem
    s = pm.quantile_partition(p.initial, 30)
    traj = pm.integrate(s, p, 1.0, dt=2e-3)
    x0 = traj.positions[:, 0]
    xn = traj.positions[:, -1]
    j = x0**2 + (xn - x0)**2 + xn**2
    # fit the growth envelope on the first half, check it on the second
    t = traj.times
    c1 = 2.0 * p.mobility.beta_max * max(1.0, p.c_force)
    envelope = (j[0] + c1 * t) * np.exp(c1 * t)
    assert np.all(j <= envelope + 1e-9)


def test_step_underflow_reports_cell():
    # colliding velocities on a hair-thin cell: halving cannot restore
    # ordering before the minimum step, so the stepper must give up
    from partmob.solver import _advance

    def colliding(x):
        return np.array([1.0, -1.0])

    with pytest.raises(StepUnderflow, match="cell 0"):
        _advance(np.array([0.0, 1e-6]), 1.0, colliding, min_dt=1e-3,
                 t_now=0.0)


def test_disordered_initial_state_rejected(attractive_problem):
    s = pm.ParticleState([1.0, 0.0], h=1.0)
    with pytest.raises(ValueError):
        pm.integrate(s, attractive_problem, 0.1, dt=0.01)
