import csv

import numpy as np
import pytest

import partmob as pm
from partmob.reconstruct import SNAPSHOT_COLUMNS, continuity_residual


def static_fields(edges, velocities=None, times=(0.0, 0.5, 1.0), h=None):
    edges = np.asarray(edges, dtype=float)
    n_cells = len(edges) - 1
    if h is None:
        h = 1.0 / n_cells
    rho = h / np.diff(edges)
    vel = np.zeros_like(edges) if velocities is None \
        else np.asarray(velocities, dtype=float)
    t = np.asarray(times)
    return pm.ReconstructedFields(
        t, np.tile(edges, (len(t), 1)), np.tile(rho, (len(t), 1)),
        np.tile(vel, (len(t), 1)), mass=h * n_cells)


def test_density_point_values():
    f = static_fields([0.0, 1.0, 2.0], h=1.0)
    assert f.density_at(0.0, 0.5)[0] == 1.0
    assert f.density_at(0.0, -3.0)[0] == 0.0
    assert f.density_at(0.0, 2.0)[0] == 0.0      # half-open at the far edge
    g = static_fields([0.0, 0.5, 2.0], h=1.0)
    assert g.density_at(0.0, 1.0)[0] == pytest.approx(2.0 / 3.0)
    assert g.density_at(0.0, 0.5)[0] == pytest.approx(2.0 / 3.0)


def test_unknown_time_rejected():
    f = static_fields([0.0, 1.0])
    with pytest.raises(KeyError):
        f.density_at(0.123, 0.5)


def test_flux_interpolates_edge_velocities():
    f = static_fields([0.0, 1.0], velocities=[-1.0, 1.0], h=1.0)
    assert f.flux_at(0.0, 0.5)[0] == pytest.approx(0.0)
    assert f.flux_at(0.0, 0.75)[0] == pytest.approx(0.5)
    assert f.flux_at(0.0, 0.0)[0] == pytest.approx(-1.0)
    # static trajectory: flux vanishes
    g = static_fields([0.0, 1.0])
    assert g.flux_at(0.0, 0.3)[0] == 0.0


def test_mass_constant_along_run(short_attractive_run):
    _, fields = short_attractive_run
    for t in fields.times:
        assert fields.mass_at(float(t)) == pytest.approx(fields.mass,
                                                         rel=1e-12)


def test_continuity_constant_test_function(short_attractive_run):
    _, fields = short_attractive_run
    r = continuity_residual(fields, lambda x: np.ones_like(x),
                            lambda x: np.zeros_like(x), 0.0,
                            float(fields.times[-1]))
    assert r == pytest.approx(0.0, abs=1e-13)


def test_continuity_static_any_test_function():
    f = static_fields([0.0, 0.4, 1.0])
    r = continuity_residual(f, lambda x: np.sin(3 * x), lambda x: 3 * np.cos(3 * x),
                            0.0, 1.0)
    assert r == pytest.approx(0.0, abs=1e-14)


def test_continuity_center_of_mass(attractive_problem):
    s = pm.quantile_partition(attractive_problem.initial, 100)
    traj = pm.integrate(s, attractive_problem, 1.0, dt=1e-3)
    fields = pm.ReconstructedFields.from_trajectory(traj)
    r = continuity_residual(fields, lambda x: x, lambda x: np.ones_like(x),
                            0.0, 1.0)
    m = fields.mass
    support = fields.edges[0][-1] - fields.edges[0][0]
    assert r <= 1e-4 * m * support
    # cross-check against the particle first-moment balance
    moments = traj.h * np.sum(traj.positions[:, :-1]
                              + 0.5 * np.diff(traj.positions, axis=1), axis=1)
    assert abs(moments[-1] - moments[0]) <= 1e-3


def test_missing_derivative_rejected(short_attractive_run):
    _, fields = short_attractive_run
    with pytest.raises(ValueError):
        continuity_residual(fields, lambda x: x, None, 0.0,
                            float(fields.times[-1]))


def test_flux_total_variation_bound(short_attractive_run):
    traj, fields = short_attractive_run
    for k in range(0, len(fields.times), 20):
        t = float(fields.times[k])
        edges = fields.edges[k]
        xs = np.linspace(edges[0], edges[-1], 4001)
        flux_l1 = np.trapezoid(np.abs(fields.flux_at(t, xs)), xs)
        sup_u = np.max(np.abs(fields.edge_velocities[k]))
        assert flux_l1 <= fields.mass * sup_u * (1.0 + 1e-6) + 1e-12


def test_snapshot_csv_schema(tmp_path, short_attractive_run):
    _, fields = short_attractive_run
    path = tmp_path / "snap.csv"
    pm.write_snapshots_csv(fields, path, time_indices=[0, len(fields.times) - 1])
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == SNAPSHOT_COLUMNS
    assert len(rows) - 1 == 2 * fields.n_cells
    # rows reproduce the stored profile exactly via repr round-trip
    assert float(rows[1][3]) == fields.densities[0, 0]
