"""Forces acting on particles and on reconstructed density profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .model import Potentials
from .quantile import ParticleState

__all__ = [
    "ForceVector",
    "particle_forces",
    "newtonian_forces_fast",
    "continuum_force",
]

_GAUSS_NODES, _GAUSS_WEIGHTS = leggauss(4)


@dataclass(frozen=True, eq=False)
class ForceVector:
    """Per-particle forces with their positive/negative split.

    ``positive[i] * negative[i] == 0`` and
    ``positive[i] + negative[i] == values[i]`` exactly.
    """

    values: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        return np.maximum(self.values, 0.0)

    @property
    def negative(self) -> np.ndarray:
        return np.minimum(self.values, 0.0)

    def __len__(self):
        return len(self.values)


def particle_forces(state: ParticleState, potentials: Potentials) -> ForceVector:
    """Exact pairwise forces ``V'(x_i) + h * sum_{j != i} W'(x_i - x_j)``.

    Direct double sum; the row-wise reduction order is fixed so repeated
    runs are bit-identical.
    """
    x = state.positions
    f = np.array(potentials.external.dv(x), dtype=float, copy=True)
    w = potentials.interaction
    if not w.is_zero:
        diff = x[:, None] - x[None, :]
        pair = w.dw(diff)
        np.fill_diagonal(pair, 0.0)
        f += state.h * pair.sum(axis=1)
    return ForceVector(f)


def newtonian_forces_fast(state: ParticleState, potentials: Potentials,
                          sign: int | None = None) -> ForceVector:
    """O(N) forces for absolute-value kernels on ordered distinct particles.

    For ``W(x) = s |x|`` the pair sum collapses to the rank formula
    ``s * h * (2 i - N)``; ``sign=0`` gives the pure external-potential
    force.
    """
    if sign is None:
        sign = potentials.interaction.newtonian_sign
    x = state.positions
    n = len(x) - 1
    f = np.array(potentials.external.dv(x), dtype=float, copy=True)
    if sign:
        ranks = np.arange(n + 1, dtype=float)
        f += sign * state.h * (2.0 * ranks - n)
    return ForceVector(f)


def _cell_index(edges: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Index of the half-open cell ``[edges[i], edges[i+1])`` containing x;
    -1 outside the support."""
    idx = np.searchsorted(edges, x, side="right") - 1
    idx = np.where((x < edges[0]) | (x >= edges[-1]), -1, idx)
    return np.clip(idx, -1, len(edges) - 2)


def _kernel_cell_integrals(fn, x, edges, skip=None):
    # per-cell values of int_{K_i} fn(x - y) dy by 4-point Gauss, splitting
    # the cell that contains x at the kernel kink
    contributions = np.zeros(len(edges) - 1)
    for i in range(len(edges) - 1):
        if skip is not None and i == skip:
            continue
        a, b = edges[i], edges[i + 1]
        pieces = [(a, x), (x, b)] if a < x < b else [(a, b)]
        acc = 0.0
        for (lo, hi) in pieces:
            half = 0.5 * (hi - lo)
            nodes = 0.5 * (lo + hi) + half * _GAUSS_NODES
            acc += half * float(np.dot(_GAUSS_WEIGHTS, fn(x - nodes)))
        contributions[i] = acc
    return contributions


def continuum_force(edges: np.ndarray, densities: np.ndarray, mass: float,
                    potentials: Potentials, x,
                    exclude_own_cell: bool = False):
    """Force field ``V'(x) + (W' * rho)(x)`` and its spatial derivative.

    ``edges``/``densities`` describe a piecewise-constant profile.  For
    absolute-value kernels the convolution reduces to the cumulative mass,
    ``V'(x) + s * (2 * C(x) - m)`` with derivative ``V'' + 2 s rho``; other
    kernels use per-cell Gauss quadrature.  ``exclude_own_cell`` drops the
    cell containing ``x`` from the convolution.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    edges = np.asarray(edges, dtype=float)
    densities = np.asarray(densities, dtype=float)
    ext = potentials.external
    w = potentials.interaction
    force = np.array(ext.dv(x), dtype=float, copy=True)
    dforce = np.array(ext.d2v(x), dtype=float, copy=True)

    if w.is_zero:
        return force, dforce

    idx = _cell_index(edges, x)
    rho_at = np.where(idx >= 0, densities[np.clip(idx, 0, None)], 0.0)

    if w.is_newtonian:
        s = float(w.newtonian_sign)
        cum_edges = np.concatenate([[0.0], np.cumsum(densities * np.diff(edges))])
        cum = np.interp(x, edges, cum_edges)
        force += s * (2.0 * cum - mass)
        dforce += s * 2.0 * rho_at
        if exclude_own_cell:
            inside = idx >= 0
            xi = edges[np.clip(idx, 0, None)]
            xi1 = edges[np.clip(idx, 0, None) + 1]
            correction = rho_at * (2.0 * x - xi - xi1)
            force -= np.where(inside, s * correction, 0.0)
            dforce -= np.where(inside, s * 2.0 * rho_at, 0.0)
        return force, dforce

    for k, xk in enumerate(x):
        skip = int(idx[k]) if (exclude_own_cell and idx[k] >= 0) else None
        conv = _kernel_cell_integrals(w.dw, xk, edges, skip=skip)
        dconv = _kernel_cell_integrals(w.d2w, xk, edges, skip=skip)
        force[k] += float(np.dot(densities, conv))
        dforce[k] += float(np.dot(densities, dconv))
    return force, dforce
