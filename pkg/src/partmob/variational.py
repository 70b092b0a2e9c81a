"""Gradient-structure functionals for the particle system.

The particle flow is the steepest descent of a discrete free energy with
respect to a state-dependent quadratic dissipation.  Three identities make
that statement quantitative and testable:

* the flow satisfies ``xdot = d2 R*(x, -f)``;
* Fenchel-Young equality ``R(x, xdot) = R*(x, -f)`` holds along the flow;
* the energy balance ``int (R + R*) dt = F(start) - F(end)`` is exact.

All functionals here sum over the full particle range 0..N.  The truncated
variants (last particle left out of the energy and of the dissipation
rate) are available through ``include_last=False`` but break the exact
balance by an O(h) drift, so they are not the default.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import cumulative_simpson, simpson

from .forces import continuum_force
from .model import Mobility, Potentials, Problem
from .quantile import ParticleState
from .reconstruct import ReconstructedFields
from .solver import Trajectory, forces_for

__all__ = [
    "free_energy",
    "reconstructed_energy",
    "dual_dissipation",
    "dissipation",
    "dissipation_rate",
    "edb_residual",
    "edb_series",
    "continuous_dual_dissipation",
    "GradientRecord",
    "gradient_records",
    "write_gradient_csv",
]

_GAUSS_NODES, _GAUSS_WEIGHTS = leggauss(4)

GRADIENT_COLUMNS = ("t", "F_h", "Fhat_h", "R_h", "R_h_star", "D_h", "edb_partial")


def _padded_densities(state: ParticleState) -> np.ndarray:
    """Cell densities with vacuum ghosts so index i-1 / i line up with the
    cells left/right of particle i."""
    return np.concatenate([[0.0], state.densities(), [0.0]])


def free_energy(state: ParticleState, potentials: Potentials,
                include_last: bool = True) -> float:
    """Discrete free energy ``sum_i V(x_i) + (h/2) sum_{i != j} W(x_i - x_j)``.

    ``include_last=False`` drops the last particle from the outer sums;
    that variant is kept for comparison only (see module docstring).
    """
    x = state.positions
    stop = len(x) if include_last else len(x) - 1
    ext = potentials.external
    total = float(np.sum(ext.v(x[:stop])))
    w = potentials.interaction
    if not w.is_zero:
        diff = x[:stop, None] - x[None, :]
        pair = w.w(diff)
        # remove the diagonal (j == i) from the first `stop` rows
        pair[np.arange(stop), np.arange(stop)] = 0.0
        total += 0.5 * state.h * float(np.sum(pair))
    return total


def dual_dissipation(state: ParticleState, mobility: Mobility,
                     zeta: np.ndarray) -> float:
    """Quadratic form ``(1/2) sum_i [beta(left_i) (z_i^-)^2
    + beta(right_i) (z_i^+)^2]`` with vacuum ghost cells."""
    zeta = np.asarray(zeta, dtype=float)
    if len(zeta) != len(state.positions):
        raise ValueError("zeta must have one entry per particle")
    rho_ext = _padded_densities(state)
    beta_left = mobility.beta(rho_ext[:-1])
    beta_right = mobility.beta(rho_ext[1:])
    zp = np.maximum(zeta, 0.0)
    zm = np.minimum(zeta, 0.0)
    return 0.5 * float(np.sum(beta_left * zm**2 + beta_right * zp**2))


def dissipation(state: ParticleState, mobility: Mobility,
                flux: np.ndarray) -> float:
    """Legendre dual of the dual dissipation: ``(1/2) sum_i
    [(j_i^-)^2 / beta(left_i) + (j_i^+)^2 / beta(right_i)]``.

    Convention ``0^2 / 0 = 0``; a nonzero flux against a vanished beta is
    infeasible and returns ``+inf``.
    """
    flux = np.asarray(flux, dtype=float)
    if len(flux) != len(state.positions):
        raise ValueError("flux must have one entry per particle")
    rho_ext = _padded_densities(state)
    beta_left = mobility.beta(rho_ext[:-1])
    beta_right = mobility.beta(rho_ext[1:])
    jp = np.maximum(flux, 0.0)
    jm = np.minimum(flux, 0.0)
    if np.any((jp > 0) & (beta_right == 0.0)) or np.any((jm < 0) & (beta_left == 0.0)):
        return float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(jm < 0, jm**2 / beta_left, 0.0) \
            + np.where(jp > 0, jp**2 / beta_right, 0.0)
    return 0.5 * float(np.sum(terms))


def dissipation_rate(state: ParticleState, problem: Problem,
                     force_values: np.ndarray | None = None,
                     include_last: bool = True) -> float:
    """Instantaneous energy decay ``sum_i [beta(right_i)(f_i^-)^2
    + beta(left_i)(f_i^+)^2]``; equals twice the dual dissipation at the
    negated force."""
    if force_values is None:
        force_values = forces_for(state, problem).values
    f = np.asarray(force_values, dtype=float)
    rho_ext = _padded_densities(state)
    beta_left = problem.mobility.beta(rho_ext[:-1])
    beta_right = problem.mobility.beta(rho_ext[1:])
    fp = np.maximum(f, 0.0)
    fm = np.minimum(f, 0.0)
    stop = len(f) if include_last else len(f) - 1
    return float(np.sum((beta_right * fm**2 + beta_left * fp**2)[:stop]))


def _rate_series(traj: Trajectory):
    """R_h(x, xdot) and R*(x, -f) at every stored time."""
    mob = traj.problem.mobility
    n = len(traj.times)
    r = np.empty(n)
    r_star = np.empty(n)
    for k in range(n):
        state = traj.state_at(k)
        f = forces_for(state, traj.problem).values
        r[k] = dissipation(state, mob, traj.velocities[k])
        r_star[k] = dual_dissipation(state, mob, -f)
    return r, r_star


def edb_residual(traj: Trajectory, s: float | None = None,
                 t: float | None = None, include_last: bool = True) -> float:
    """``|int_s^t (R + R*) dr + F(t) - F(s)|`` on the stored grid
    (composite Simpson in time)."""
    times = traj.times
    ks = 0 if s is None else traj.index_of(s)
    kt = len(times) - 1 if t is None else traj.index_of(t)
    if kt - ks < 2:
        raise ValueError("need at least three stored times between s and t")
    r, r_star = _rate_series(traj)
    sl = slice(ks, kt + 1)
    integral = float(simpson((r + r_star)[sl], x=times[sl]))
    pots = traj.problem.potentials
    f_end = free_energy(traj.state_at(kt), pots, include_last=include_last)
    f_start = free_energy(traj.state_at(ks), pots, include_last=include_last)
    return abs(integral + f_end - f_start)


def edb_series(traj: Trajectory, include_last: bool = True):
    """Arrays (times, F, R, R*, D, running balance defect)."""
    times = traj.times
    r, r_star = _rate_series(traj)
    pots = traj.problem.potentials
    energies = np.array([free_energy(traj.state_at(k), pots,
                                     include_last=include_last)
                         for k in range(len(times))])
    d = np.array([dissipation_rate(traj.state_at(k), traj.problem,
                                   include_last=include_last)
                  for k in range(len(times))])
    partial = cumulative_simpson(r + r_star, x=times, initial=0.0)
    defect = partial + energies - energies[0]
    return times, energies, r, r_star, d, defect


# ---------------------------------------------------------------------------
# Reconstructed-profile functionals
# ---------------------------------------------------------------------------

def _cell_pair_kernel_means(edges: np.ndarray, w) -> np.ndarray:
    """Matrix of cell-pair averages of ``W(x - y)`` (4x4 Gauss per pair)."""
    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * np.diff(edges)
    nodes = mids[:, None] + halves[:, None] * _GAUSS_NODES[None, :]
    # pairwise differences between all Gauss nodes: (i, a, j, b)
    diff = nodes[:, :, None, None] - nodes[None, None, :, :]
    vals = w(diff)
    wts = _GAUSS_WEIGHTS * 0.5  # reference-interval averages
    return np.einsum("a,b,iajb->ij", wts, wts, vals)


def reconstructed_energy(edges: np.ndarray, densities: np.ndarray,
                         potentials: Potentials, mass_per_cell: float) -> float:
    """Energy of the piecewise-constant profile: exact density integral of
    V plus cell-averaged interaction, own-cell term excluded."""
    edges = np.asarray(edges, dtype=float)
    densities = np.asarray(densities, dtype=float)
    h = mass_per_cell
    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * np.diff(edges)
    ext = potentials.external
    nodes = mids[:, None] + halves[:, None] * _GAUSS_NODES[None, :]
    weights = halves[:, None] * _GAUSS_WEIGHTS[None, :]
    total = float(np.sum(densities[:, None] * weights * ext.v(nodes)))
    w = potentials.interaction
    if w.is_zero:
        return total
    if w.is_newtonian:
        # cells are disjoint, so the pair average of s|x-y| is s times the
        # distance between cell midpoints
        means = w.newtonian_sign * np.abs(mids[:, None] - mids[None, :])
    else:
        means = _cell_pair_kernel_means(edges, w.w)
    np.fill_diagonal(means, 0.0)
    total += 0.5 * h * h * float(np.sum(means))
    return total


def continuous_dual_dissipation(edges: np.ndarray, densities: np.ndarray,
                                problem: Problem,
                                exclude_own_cell: bool = False) -> float:
    """``(1/2) int |F(x)|^2 theta(rho(x)) dx`` for a piecewise-constant
    profile, with the force from the same profile."""
    edges = np.asarray(edges, dtype=float)
    densities = np.asarray(densities, dtype=float)
    mass = float(np.sum(densities * np.diff(edges)))
    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * np.diff(edges)
    nodes = (mids[:, None] + halves[:, None] * _GAUSS_NODES[None, :]).ravel()
    weights = (halves[:, None] * _GAUSS_WEIGHTS[None, :]).ravel()
    force, _ = continuum_force(edges, densities, mass, problem.potentials,
                               nodes, exclude_own_cell=exclude_own_cell)
    theta_vals = problem.mobility.theta(np.repeat(densities, 4))
    return 0.5 * float(np.sum(weights * force**2 * theta_vals))


@dataclass(frozen=True)
class GradientRecord:
    t: float
    energy: float
    reconstructed: float
    rate: float
    dual_rate: float
    decay: float
    balance_defect: float


def gradient_records(traj: Trajectory, fields: ReconstructedFields | None = None,
                     include_last: bool = True) -> list[GradientRecord]:
    if fields is None:
        fields = ReconstructedFields.from_trajectory(traj)
    times, energies, r, r_star, d, defect = edb_series(traj, include_last)
    pots = traj.problem.potentials
    records = []
    for k, t in enumerate(times):
        fhat = reconstructed_energy(fields.edges[k], fields.densities[k],
                                    pots, traj.h)
        records.append(GradientRecord(float(t), float(energies[k]), fhat,
                                      float(r[k]), float(r_star[k]),
                                      float(d[k]), float(defect[k])))
    return records


def write_gradient_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(GRADIENT_COLUMNS)
        for rec in records:
            out.writerow([repr(rec.t), repr(rec.energy), repr(rec.reconstructed),
                          repr(rec.rate), repr(rec.dual_rate), repr(rec.decay),
                          repr(rec.balance_defect)])
