"""Problem data: mobility, potentials, initial density, derived constants.

A problem instance couples a capped mobility ``beta`` (transport shuts off
at a finite density), an external potential ``V``, an interaction kernel
``W`` and a compactly supported initial density.  All types are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

__all__ = [
    "Mobility",
    "power_cap_mobility",
    "tabulated_mobility",
    "ExternalPotential",
    "zero_potential",
    "linear_potential",
    "quadratic_potential",
    "external_potential",
    "InteractionKind",
    "InteractionPotential",
    "no_interaction",
    "newtonian",
    "morse",
    "regular_interaction",
    "Potentials",
    "InitialDensity",
    "uniform_density",
    "parabolic_bump",
    "piecewise_constant_density",
    "Problem",
    "ValidationIssue",
    "InvalidProblem",
    "check_problem",
    "validate",
    "theta",
]

Array = np.ndarray


# ---------------------------------------------------------------------------
# Mobility
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Mobility:
    """Density-dependent slowdown factor ``beta``.

    ``beta`` is non-increasing, positive at zero density and identically
    zero above the cap.  ``theta(s) = s * beta(s)`` is the resulting
    mobility of the flux; it vanishes both in vacuum and at the cap.
    """

    kind: str
    beta: Callable[[Array], Array]
    beta_max: float
    cap: float
    lip_beta: float
    lip_theta: float
    dbeta: Callable[[Array], Array]

    def theta(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("density must be non-negative")
        return s * self.beta(s)

    def dtheta(self, s):
        s = np.asarray(s, dtype=float)
        return self.beta(s) + s * self.dbeta(s)


def power_cap_mobility(m_beta: float = 1.0, gamma: float = 1.0) -> Mobility:
    """``beta(s) = max(m_beta - s**gamma, 0)`` with ``gamma >= 1``.

    The density cap (the point past which beta vanishes) is
    ``m_beta ** (1 / gamma)``; for ``gamma = 1`` it coincides with
    ``m_beta`` itself.
    """
    if m_beta <= 0:
        raise ValueError("m_beta must be positive")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    cap = m_beta ** (1.0 / gamma)

    def beta(s, _m=m_beta, _g=gamma):
        s = np.asarray(s, dtype=float)
        return np.maximum(_m - np.abs(s) ** _g, 0.0)

    def dbeta(s, _m=m_beta, _g=gamma, _cap=cap):
        # left derivative at the cap so theta' is one-sided on [0, cap]
        s = np.asarray(s, dtype=float)
        return np.where(s <= _cap, -_g * np.abs(s) ** (_g - 1.0), 0.0)

    lip_beta = gamma * cap ** (gamma - 1.0)
    # theta'(s) = m_beta - (gamma + 1) s**gamma on [0, cap]
    lip_theta = max(m_beta, gamma * m_beta)
    return Mobility("power_cap", beta, float(m_beta), float(cap),
                    float(lip_beta), float(lip_theta), dbeta)


def tabulated_mobility(samples: Array, values: Array) -> Mobility:
    """Piecewise-linear mobility from a (density, beta) table.

    The table must be non-increasing, start positive and end at zero;
    evaluation clamps to ``[0, beta_max]`` and extends by zero beyond the
    last sample.
    """
    s = np.asarray(samples, dtype=float)
    v = np.asarray(values, dtype=float)
    if s.ndim != 1 or s.shape != v.shape or len(s) < 2:
        raise ValueError("need matching 1D sample/value arrays of length >= 2")
    if np.any(np.diff(s) <= 0):
        raise ValueError("sample abscissae must be strictly increasing")
    if np.any(np.diff(v) > 1e-14):
        raise ValueError("tabulated beta must be non-increasing")
    if v[0] <= 0 or abs(v[-1]) > 1e-14:
        raise ValueError("tabulated beta must start positive and end at 0")
    beta_max = float(v[0])
    nonzero = np.nonzero(v > 0)[0]
    cap = float(s[nonzero[-1] + 1]) if len(nonzero) else float(s[0])

    def beta(x, _s=s, _v=v, _bm=beta_max):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, _s, _v, left=_bm, right=0.0)
        return np.clip(out, 0.0, _bm)

    slopes = np.diff(v) / np.diff(s)

    def dbeta(x, _s=s, _slopes=slopes):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(_s, x, side="right") - 1, 0, len(_slopes) - 1)
        out = _slopes[idx]
        return np.where((x < _s[0]) | (x > _s[-1]), 0.0, out)

    lip_beta = float(np.max(np.abs(slopes)))
    grid = np.linspace(0.0, cap, 2049)
    lip_theta = float(np.max(np.abs(beta(grid) + grid * dbeta(grid))))
    return Mobility("tabulated", beta, beta_max, cap, lip_beta, lip_theta, dbeta)


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExternalPotential:
    """External potential given as the triple ``(V, V', V'')``.

    ``c_growth`` bounds ``|V'(r)| <= c_growth * (1 + |r|)``; ``sup_d2`` and
    ``lip_d2`` bound the second derivative and its Lipschitz constant.
    """

    v: Callable[[Array], Array]
    dv: Callable[[Array], Array]
    d2v: Callable[[Array], Array]
    c_growth: float
    sup_d2: float
    lip_d2: float
    label: str = "custom"


def zero_potential() -> ExternalPotential:
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return ExternalPotential(z, z, z, 0.0, 0.0, 0.0, "zero")


def linear_potential(slope: float) -> ExternalPotential:
    a = float(slope)
    return ExternalPotential(
        lambda x: a * np.asarray(x, dtype=float),
        lambda x: np.full_like(np.asarray(x, dtype=float), a),
        lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        abs(a), 0.0, 0.0, "linear",
    )


def quadratic_potential(curvature: float = 1.0) -> ExternalPotential:
    a = float(curvature)
    return ExternalPotential(
        lambda x: 0.5 * a * np.asarray(x, dtype=float) ** 2,
        lambda x: a * np.asarray(x, dtype=float),
        lambda x: np.full_like(np.asarray(x, dtype=float), a),
        abs(a), abs(a), 0.0, "quadratic",
    )


def external_potential(v, dv, d2v, c_growth, sup_d2, lip_d2,
                       label="custom") -> ExternalPotential:
    return ExternalPotential(v, dv, d2v, float(c_growth), float(sup_d2),
                             float(lip_d2), label)


class InteractionKind(str, Enum):
    ZERO = "zero"
    REGULAR = "regular"
    NEWTONIAN_ATTRACTIVE = "newtonian_attractive"
    NEWTONIAN_REPULSIVE = "newtonian_repulsive"
    MORSE = "morse"


@dataclass(frozen=True, eq=False)
class InteractionPotential:
    """Even interaction kernel ``W`` with derivative conventions.

    ``dw(0) = 0`` for the kinked kinds (odd extension, consistent with
    ``sign(0) = 0``).  ``newtonian_sign`` is +1 for the attractive absolute
    value kernel, -1 for the repulsive one, 0 otherwise; the sign drives the
    closed-form cumulative expressions used elsewhere.
    """

    kind: InteractionKind
    w: Callable[[Array], Array]
    dw: Callable[[Array], Array]
    d2w: Callable[[Array], Array]
    c_growth: float
    sup_dw: float
    sup_d2w: float
    lip_d2w: float
    newtonian_sign: int = 0

    @property
    def is_newtonian(self) -> bool:
        return self.newtonian_sign != 0

    @property
    def is_zero(self) -> bool:
        return self.kind is InteractionKind.ZERO


def no_interaction() -> InteractionPotential:
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return InteractionPotential(InteractionKind.ZERO, z, z, z, 0.0, 0.0, 0.0, 0.0)


def newtonian(attractive: bool = True) -> InteractionPotential:
    sign = 1 if attractive else -1
    kind = (InteractionKind.NEWTONIAN_ATTRACTIVE if attractive
            else InteractionKind.NEWTONIAN_REPULSIVE)

    def w(x, _s=sign):
        return _s * np.abs(np.asarray(x, dtype=float))

    def dw(x, _s=sign):
        return _s * np.sign(np.asarray(x, dtype=float))

    def d2w(x):
        # pointwise second derivative away from the kink; the distributional
        # part is handled by the cumulative closed forms
        return np.zeros_like(np.asarray(x, dtype=float))

    return InteractionPotential(kind, w, dw, d2w, 1.0, 1.0, 0.0, 0.0, sign)


def morse(c_attract: float, ell_attract: float,
          c_repulse: float, ell_repulse: float) -> InteractionPotential:
    """Short-range attraction/repulsion kernel with two decay lengths.

    ``W(x) = -c_attract * exp(-|x|/ell_attract)
            + c_repulse * exp(-|x|/ell_repulse)``.
    """
    ca, la, cr, lr = (float(c_attract), float(ell_attract),
                      float(c_repulse), float(ell_repulse))
    if min(ca, la, cr, lr) <= 0:
        raise ValueError("Morse parameters must be positive")

    def w(x):
        ax = np.abs(np.asarray(x, dtype=float))
        return -ca * np.exp(-ax / la) + cr * np.exp(-ax / lr)

    def dw(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        return np.sign(x) * (ca / la * np.exp(-ax / la)
                             - cr / lr * np.exp(-ax / lr))

    def d2w(x):
        ax = np.abs(np.asarray(x, dtype=float))
        return -ca / la**2 * np.exp(-ax / la) + cr / lr**2 * np.exp(-ax / lr)

    sup_dw = ca / la + cr / lr
    sup_d2w = ca / la**2 + cr / lr**2
    lip_d2w = ca / la**3 + cr / lr**3
    return InteractionPotential(InteractionKind.MORSE, w, dw, d2w,
                                sup_dw, sup_dw, sup_d2w, lip_d2w)


def regular_interaction(w, dw, d2w, c_growth, sup_dw, sup_d2w,
                        lip_d2w) -> InteractionPotential:
    return InteractionPotential(InteractionKind.REGULAR, w, dw, d2w,
                                float(c_growth), float(sup_dw),
                                float(sup_d2w), float(lip_d2w))


@dataclass(frozen=True, eq=False)
class Potentials:
    external: ExternalPotential
    interaction: InteractionPotential


# ---------------------------------------------------------------------------
# Initial density
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InitialDensity:
    """Compactly supported non-negative initial profile.

    ``density`` and ``cumulative`` are vectorised; ``cumulative(x)`` is the
    mass of ``(-inf, x]`` and reaches ``mass`` at ``x_max``.  ``lower_bound``
    is a uniform positive floor on the support when one exists, else 0.
    """

    kind: str
    density: Callable[[Array], Array]
    cumulative: Callable[[Array], Array]
    mass: float
    sup_norm: float
    lower_bound: float
    x_min: float
    x_max: float
    params: dict = field(default_factory=dict)
    interior_vacuum: bool = False


def uniform_density(a: float, b: float, height: float,
                    mass: float | None = None) -> InitialDensity:
    a, b, height = float(a), float(b), float(height)
    if b <= a:
        raise ValueError("need a < b")
    true_mass = height * (b - a)

    def density(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= a) & (x <= b), height, 0.0)

    def cumulative(x):
        x = np.asarray(x, dtype=float)
        return height * np.clip(x - a, 0.0, b - a)

    return InitialDensity("uniform", density, cumulative,
                          float(true_mass if mass is None else mass),
                          height, height, a, b,
                          {"a": a, "b": b, "height": height})


def parabolic_bump(amplitude: float = 0.75, center: float = 0.0,
                   radius: float = 1.0,
                   mass: float | None = None) -> InitialDensity:
    """``rho(x) = amplitude * max(1 - ((x - center)/radius)**2, 0)``."""
    amp, c, r = float(amplitude), float(center), float(radius)
    if amp <= 0 or r <= 0:
        raise ValueError("amplitude and radius must be positive")
    true_mass = amp * 4.0 * r / 3.0

    def density(x):
        u = (np.asarray(x, dtype=float) - c) / r
        return amp * np.maximum(1.0 - u * u, 0.0)

    def cumulative(x):
        u = np.clip((np.asarray(x, dtype=float) - c) / r, -1.0, 1.0)
        return amp * r * (u - u**3 / 3.0 + 2.0 / 3.0)

    return InitialDensity("parabolic_bump", density, cumulative,
                          float(true_mass if mass is None else mass),
                          amp, 0.0, c - r, c + r,
                          {"amplitude": amp, "center": c, "radius": r})


def piecewise_constant_density(breakpoints, values,
                               mass: float | None = None) -> InitialDensity:
    bp = np.asarray(breakpoints, dtype=float)
    vals = np.asarray(values, dtype=float)
    if bp.ndim != 1 or len(bp) != len(vals) + 1 or len(vals) < 1:
        raise ValueError("need len(breakpoints) == len(values) + 1")
    if np.any(np.diff(bp) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    widths = np.diff(bp)
    true_mass = float(np.sum(vals * widths))
    cum = np.concatenate([[0.0], np.cumsum(vals * widths)])
    positive = vals > 0
    interior_vacuum = bool(np.any(~positive[np.nonzero(positive)[0][0]:
                                            np.nonzero(positive)[0][-1] + 1])) \
        if np.any(positive) else False

    def density(x, _bp=bp, _vals=vals):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(_bp, x, side="right") - 1, 0, len(_vals) - 1)
        out = _vals[idx]
        return np.where((x < _bp[0]) | (x > _bp[-1]), 0.0, out)

    def cumulative(x, _bp=bp, _cum=cum):
        x = np.asarray(x, dtype=float)
        return np.interp(x, _bp, _cum)

    return InitialDensity("piecewise_constant", density, cumulative,
                          float(true_mass if mass is None else mass),
                          float(np.max(vals)),
                          float(np.min(vals)) if np.all(positive) else 0.0,
                          float(bp[0]), float(bp[-1]),
                          {"breakpoints": bp, "values": vals},
                          interior_vacuum=interior_vacuum)


# ---------------------------------------------------------------------------
# Problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Problem:
    mobility: Mobility
    potentials: Potentials
    initial: InitialDensity

    @property
    def M(self) -> float:
        """Uniform density bound ``max(sup rho0, density cap)``."""
        return max(self.initial.sup_norm, self.mobility.cap)

    @property
    def c_force(self) -> float:
        """Lipschitz-type constant for neighbour force differences.

        For absolute-value kernels the interaction second difference
        cancels exactly, leaving only the external-potential terms plus a
        ``2M`` contribution from the kernel kink.
        """
        v = self.potentials.external
        w = self.potentials.interaction
        if w.is_zero:
            return max(v.sup_d2, v.lip_d2)
        if w.is_newtonian:
            return max(v.sup_d2 + 2.0 * self.M, v.lip_d2)
        m = self.initial.mass
        c1 = v.sup_d2 + m * w.sup_d2w + 2.0 * self.M * w.sup_dw
        c2 = v.lip_d2 + m * w.lip_d2w
        c3 = v.sup_d2 + (2.0 + m) * w.sup_d2w
        return max(c1, c2, c3)


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str


NON_MONOTONE_MOBILITY = "NonMonotoneMobility"
MASS_MISMATCH = "MassMismatch"
UNBOUNDED_SUPPORT = "UnboundedSupport"
NEGATIVE_DENSITY = "NegativeDensity"


class InvalidProblem(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        lines = "; ".join(f"{i.code}: {i.message}" for i in self.issues)
        super().__init__(f"invalid problem: {lines}")


def _integrate_density(initial: InitialDensity, panels_per_piece: int = 512) -> float:
    # composite Gauss aligned to declared breakpoints, so step profiles are
    # integrated exactly and smooth ones far beyond the check tolerance
    from numpy.polynomial.legendre import leggauss
    nodes_ref, weights_ref = leggauss(4)
    brk = initial.params.get("breakpoints")
    pieces = np.asarray(brk, dtype=float) if brk is not None \
        else np.array([initial.x_min, initial.x_max])
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        edges = np.linspace(a, b, panels_per_piece + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        halves = 0.5 * np.diff(edges)
        nodes = mids[:, None] + halves[:, None] * nodes_ref[None, :]
        weights = halves[:, None] * weights_ref[None, :]
        total += float(np.sum(weights * initial.density(nodes)))
    return total


def check_problem(problem: Problem) -> list[ValidationIssue]:
    """Collect every violated structural assumption; empty list means valid."""
    issues: list[ValidationIssue] = []
    mob = problem.mobility
    init = problem.initial

    s = np.linspace(0.0, max(mob.cap, init.sup_norm, 1.0) * 1.5, 1000)
    bvals = mob.beta(s)
    if np.any(np.diff(bvals) > 1e-12 * max(mob.beta_max, 1.0)):
        issues.append(ValidationIssue(
            NON_MONOTONE_MOBILITY,
            "beta must be non-increasing in the density"))
    if mob.beta_max <= 0 or abs(float(mob.beta(mob.cap))) > 1e-12:
        issues.append(ValidationIssue(
            NON_MONOTONE_MOBILITY,
            "beta must be positive at 0 and vanish at the density cap"))

    if not (np.isfinite(init.x_min) and np.isfinite(init.x_max)
            and init.x_max > init.x_min):
        issues.append(ValidationIssue(
            UNBOUNDED_SUPPORT,
            "initial density needs a bounded support interval"))
    else:
        x = np.linspace(init.x_min, init.x_max, 4001)
        rho = init.density(x)
        if np.any(rho < -1e-12 * max(init.sup_norm, 1.0)):
            issues.append(ValidationIssue(
                NEGATIVE_DENSITY, "initial density takes negative values"))
        if init.mass <= 0:
            issues.append(ValidationIssue(
                MASS_MISMATCH, "declared mass must be positive"))
        else:
            quad_mass = _integrate_density(init)
            if abs(quad_mass - init.mass) > 1e-10 * init.mass:
                issues.append(ValidationIssue(
                    MASS_MISMATCH,
                    f"density integrates to {quad_mass:.12g}, declared mass "
                    f"is {init.mass:.12g}"))
        cdf = init.cumulative(x)
        if np.any(np.diff(cdf) < -1e-12 * max(init.mass, 1.0)):
            issues.append(ValidationIssue(
                NEGATIVE_DENSITY, "cumulative function must be non-decreasing"))
        if abs(float(init.cumulative(init.x_max)) - init.mass) \
                > 1e-10 * max(init.mass, 1.0):
            issues.append(ValidationIssue(
                MASS_MISMATCH,
                "cumulative function does not reach the declared mass at the "
                "right support endpoint"))
    return issues


def validate(problem: Problem) -> Problem:
    """Return ``problem`` unchanged, or raise ``InvalidProblem`` listing
    every violated assumption."""
    issues = check_problem(problem)
    if issues:
        raise InvalidProblem(issues)
    return problem


def theta(problem: Problem, s):
    """Flux mobility ``s * beta(s)``; rejects negative densities."""
    return problem.mobility.theta(s)
