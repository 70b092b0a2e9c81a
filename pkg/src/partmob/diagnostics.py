"""Norm, distance and entropy diagnostics for reconstructed profiles."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import simpson

from .forces import continuum_force
from .model import Problem
from .reconstruct import ReconstructedFields

__all__ = [
    "bv_norm",
    "total_variation",
    "h1_proxy",
    "w1_distance",
    "DiagnosticsRecord",
    "diagnostics_records",
    "write_diagnostics_csv",
    "BumpTestFunction",
    "standard_bump_grid",
    "entropy_residual",
    "entropy_report",
    "write_entropy_csv",
]

_GAUSS_NODES, _GAUSS_WEIGHTS = leggauss(4)

DIAGNOSTICS_COLUMNS = ("t", "mass", "bv", "tv", "h1", "w1_from_initial",
                       "support", "max_density", "min_cell_ratio")
ENTROPY_COLUMNS = ("c", "phi_id", "residual")


def total_variation(densities: np.ndarray) -> float:
    """Jump sum of the piecewise-constant profile, boundary jumps included."""
    rho = np.asarray(densities, dtype=float)
    return float(rho[0] + np.sum(np.abs(np.diff(rho))) + rho[-1])


def bv_norm(fields: ReconstructedFields, t: float) -> float:
    """L1 norm plus total variation at a stored time."""
    _, rho = fields.profile(t)
    return fields.mass_at(t) + total_variation(rho)


def h1_proxy(edges: np.ndarray, densities: np.ndarray) -> float:
    """L2 norm plus L2 norm of the derivative of the midpoint interpolant.

    Nodes are the cell midpoints with the cell values, closed by linear
    ramps to zero over the first and last half-cells.  A stand-in for a
    Sobolev norm that is finite on piecewise-constant data.
    """
    edges = np.asarray(edges, dtype=float)
    rho = np.asarray(densities, dtype=float)
    xs = np.concatenate([[edges[0]], 0.5 * (edges[:-1] + edges[1:]), [edges[-1]]])
    vals = np.concatenate([[0.0], rho, [0.0]])
    dx = np.diff(xs)
    va, vb = vals[:-1], vals[1:]
    sq = np.sum(dx * (va**2 + va * vb + vb**2) / 3.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        dsq = np.sum(np.where(dx > 0, (vb - va) ** 2 / dx, 0.0))
    return float(np.sqrt(sq) + np.sqrt(dsq))


def _segment_abs_integral(lengths, da, db):
    # exact integral of |linear| over each segment given endpoint values
    same = da * db >= 0
    tri = np.where(same, 0.5 * (np.abs(da) + np.abs(db)),
                   0.5 * (da**2 + db**2) / np.maximum(np.abs(da) + np.abs(db), 1e-300))
    return np.sum(lengths * tri)


def w1_distance(fields: ReconstructedFields, s: float, t: float) -> float:
    """1-Wasserstein distance between the mass-normalised profiles at two
    stored times (exact: L1 distance of the cumulative functions)."""
    edges_s, rho_s = fields.profile(s)
    edges_t, rho_t = fields.profile(t)
    m = fields.mass
    grid = np.union1d(edges_s, edges_t)
    cum_s = np.interp(grid, edges_s,
                      np.concatenate([[0.0], np.cumsum(rho_s * np.diff(edges_s))]))
    cum_t = np.interp(grid, edges_t,
                      np.concatenate([[0.0], np.cumsum(rho_t * np.diff(edges_t))]))
    d = (cum_s - cum_t) / m
    return float(_segment_abs_integral(np.diff(grid), d[:-1], d[1:]))


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    l1_mass: float
    bv_norm: float
    tv_only: float
    h1_proxy: float
    w1_from_initial: float
    support_measure: float
    max_density: float
    min_cell_ratio: float


def diagnostics_records(fields: ReconstructedFields,
                        problem: Problem) -> list[DiagnosticsRecord]:
    records = []
    h = fields.mass / fields.n_cells
    t0 = float(fields.times[0])
    for k, t in enumerate(fields.times):
        edges, rho = fields.edges[k], fields.densities[k]
        widths = np.diff(edges)
        tv = total_variation(rho)
        records.append(DiagnosticsRecord(
            t=float(t),
            l1_mass=fields.mass_at(float(t)),
            bv_norm=fields.mass_at(float(t)) + tv,
            tv_only=tv,
            h1_proxy=h1_proxy(edges, rho),
            w1_from_initial=w1_distance(fields, t0, float(t)),
            support_measure=float(edges[-1] - edges[0]),
            max_density=float(np.max(rho)),
            min_cell_ratio=float(np.min(widths) * problem.M / h),
        ))
    return records


def write_diagnostics_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(DIAGNOSTICS_COLUMNS)
        for r in records:
            out.writerow([repr(r.t), repr(r.l1_mass), repr(r.bv_norm),
                          repr(r.tv_only), repr(r.h1_proxy),
                          repr(r.w1_from_initial), repr(r.support_measure),
                          repr(r.max_density), repr(r.min_cell_ratio)])


# ---------------------------------------------------------------------------
# Entropy inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpTestFunction:
    """``phi(t, x) = (1 - t/t_end) * (1 - ((x-center)/radius)^2)^3_+``.

    Non-negative, C^2 in space, vanishes at ``t_end`` and outside the bump.
    """

    center: float
    radius: float
    t_end: float
    label: str = ""

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.radius, self.center + self.radius

    def _bump(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.radius
        return np.maximum(1.0 - u * u, 0.0) ** 3

    def value(self, t, x):
        return (1.0 - t / self.t_end) * self._bump(x)

    def dt(self, t, x):
        return -self._bump(x) / self.t_end

    def dx(self, t, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.radius
        core = np.maximum(1.0 - u * u, 0.0)
        return (1.0 - t / self.t_end) * 3.0 * core**2 * (-2.0 * u / self.radius)


def standard_bump_grid(t_end: float, x_lo: float, x_hi: float,
                       n_centers: int = 3,
                       radius_fractions=(0.2, 0.35, 0.5)) -> list[BumpTestFunction]:
    """Grid of space-time bumps covering (x_lo, x_hi); default 3x3 = 9."""
    width = x_hi - x_lo
    centers = np.linspace(x_lo + 0.25 * width, x_hi - 0.25 * width, n_centers)
    bumps = []
    for a in centers:
        for frac in radius_fractions:
            r = frac * width
            bumps.append(BumpTestFunction(float(a), float(r), t_end,
                                          label=f"a={a:.3g},r={r:.3g}"))
    return bumps


def _panel_nodes(edges, lo, hi, max_len):
    """Gauss nodes/weights on [lo, hi] split at the profile edges, long
    segments subdivided so the quadrature resolves the test function."""
    cuts = edges[(edges > lo) & (edges < hi)]
    brk = np.concatenate([[lo], cuts, [hi]])
    a, b = brk[:-1], brk[1:]
    n_sub = np.maximum(1, np.ceil((b - a) / max_len).astype(int))
    seg = np.repeat(np.arange(len(a)), n_sub)
    offsets = np.repeat(np.cumsum(n_sub) - n_sub, n_sub)
    k = np.arange(len(seg)) - offsets
    width = (b - a) / n_sub
    starts = a[seg] + k * width[seg]
    mids = starts + 0.5 * width[seg]
    halves = 0.5 * width[seg]
    nodes = (mids[:, None] + halves[:, None] * _GAUSS_NODES[None, :]).ravel()
    weights = (halves[:, None] * _GAUSS_WEIGHTS[None, :]).ravel()
    return nodes, weights


def _density_on(edges, rho, x):
    idx = np.searchsorted(edges, x, side="right") - 1
    inside = (x >= edges[0]) & (x < edges[-1])
    return np.where(inside, rho[np.clip(idx, 0, len(rho) - 1)], 0.0)


def _entropy_residuals_for_phi(fields, problem: Problem, c_values,
                               phi: BumpTestFunction,
                               time_stride: int = 1) -> np.ndarray:
    """Residuals for one test bump across several entropy levels, sharing
    the profile/force evaluations per stored time."""
    c_values = np.asarray(c_values, dtype=float)
    if np.any(c_values <= 0):
        raise ValueError("entropy levels c must be positive")
    lo, hi = phi.support
    mob = problem.mobility
    theta_c = mob.theta(c_values)
    max_len = (hi - lo) / 64.0
    indices = list(range(0, len(fields.times), time_stride))
    if indices[-1] != len(fields.times) - 1:
        indices.append(len(fields.times) - 1)
    # the bump family vanishes exactly at its horizon and is negative
    # beyond it, so the stored window must end there
    horizon = float(fields.times[indices[-1]])
    if abs(phi.t_end - horizon) > 1e-9 * max(1.0, phi.t_end):
        raise ValueError("test function horizon must match the stored window")

    series = np.empty((len(indices), len(c_values)))
    for row, k in enumerate(indices):
        t = float(fields.times[k])
        edges, rho = fields.profile_at_index(k)
        nodes, weights = _panel_nodes(edges, lo, hi, max_len)
        rho_n = _density_on(edges, rho, nodes)
        force, dforce = continuum_force(edges, rho, fields.mass,
                                        problem.potentials, nodes)
        theta_n = mob.theta(rho_n)
        phi_t = phi.dt(t, nodes) * weights
        phi_x = phi.dx(t, nodes) * force * weights
        phi_v = phi.value(t, nodes) * dforce * weights
        for j, c in enumerate(c_values):
            sign = np.sign(rho_n - c)
            series[row, j] = np.sum(
                np.abs(rho_n - c) * phi_t
                - sign * ((theta_n - theta_c[j]) * phi_x - theta_c[j] * phi_v))
    bulk = simpson(series, x=fields.times[indices], axis=0)

    edges0, rho0 = fields.profile_at_index(0)
    nodes, weights = _panel_nodes(edges0, lo, hi, max_len)
    rho_n = _density_on(edges0, rho0, nodes)
    phi0 = phi.value(float(fields.times[0]), nodes) * weights
    initial = np.array([np.sum(np.abs(rho_n - c) * phi0) for c in c_values])
    return initial + bulk


def entropy_residual(fields, problem: Problem, c: float,
                     phi: BumpTestFunction, time_stride: int = 1) -> float:
    """Value of the entropy functional for level ``c`` and test bump ``phi``.

    Non-negative in the vanishing-mesh limit for entropy solutions; a
    markedly negative value flags an entropy violation.  Space integrals
    run over the bump support (Gauss order 4 on profile-aligned panels),
    time by composite Simpson on the stored grid.
    """
    return float(_entropy_residuals_for_phi(fields, problem, [c], phi,
                                            time_stride)[0])


def entropy_report(fields, problem: Problem, c_values, phis,
                   time_stride: int = 1):
    """Rows (c, phi_id, residual) over the level/test-function grid."""
    rows = []
    for i, phi in enumerate(phis):
        vals = _entropy_residuals_for_phi(fields, problem, c_values, phi,
                                          time_stride)
        for c, value in zip(c_values, vals):
            rows.append((float(c), phi.label or str(i), float(value)))
    return rows


def write_entropy_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(ENTROPY_COLUMNS)
        for c, phi_id, residual in rows:
            out.writerow([repr(float(c)), phi_id, repr(float(residual))])
