"""Upwind particle dynamics and time integration.

The velocity of each particle mixes its neighbouring cell densities
through the slowdown factor: the part of the force pushing right is damped
by the left cell's density, the part pushing left by the right cell's, with
vacuum (``beta_max``) outside the swarm.  This ordering-aware splitting is
what keeps particles from crossing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forces import ForceVector, newtonian_forces_fast, particle_forces
from .model import Problem
from .quantile import ParticleState

__all__ = [
    "StepUnderflow",
    "NonFiniteState",
    "Trajectory",
    "rhs",
    "forces_for",
    "integrate",
    "check_cell_bounds",
    "CellBoundReport",
]


class StepUnderflow(RuntimeError):
    """Step halving hit the minimum step without restoring particle order."""


class NonFiniteState(RuntimeError):
    pass


class _Unordered(RuntimeError):
    pass


def forces_for(state: ParticleState, problem: Problem) -> ForceVector:
    """Forces with the cheap rank-sum path whenever the kernel allows it."""
    w = problem.potentials.interaction
    if w.is_zero or w.is_newtonian:
        return newtonian_forces_fast(state, problem.potentials)
    return particle_forces(state, problem.potentials)


def _velocity(positions: np.ndarray, h: float, problem: Problem) -> np.ndarray:
    widths = np.diff(positions)
    if np.any(widths <= 0.0):
        raise _Unordered
    rho = h / widths
    beta = problem.mobility.beta
    rho_ext = np.concatenate([[0.0], rho, [0.0]])
    beta_left = beta(rho_ext[:-1])   # cell left of particle i; vacuum at i=0
    beta_right = beta(rho_ext[1:])   # cell right of particle i; vacuum at i=N
    f = forces_for(ParticleState(positions, h=h), problem)
    return -beta_right * f.negative - beta_left * f.positive


def rhs(state: ParticleState, problem: Problem) -> np.ndarray:
    """Particle velocities for the current configuration."""
    try:
        return _velocity(state.positions, state.h, problem)
    except _Unordered:
        raise ValueError("state is not strictly ordered") from None


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray     # (n_times, n_particles)
    velocities: np.ndarray    # (n_times, n_particles)
    h: float
    problem: Problem
    scheme: str = "rk4"

    @property
    def n_cells(self) -> int:
        return self.positions.shape[1] - 1

    def state_at(self, k: int) -> ParticleState:
        return ParticleState(self.positions[k], h=self.h, t=float(self.times[k]))

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(self.times[-1])):
            raise KeyError(f"time {t!r} is not a stored output time")
        return k

    def widths(self) -> np.ndarray:
        return np.diff(self.positions, axis=1)

    def densities(self) -> np.ndarray:
        return self.h / self.widths()


def _rk4_step(x, dt, velocity):
    k1 = velocity(x)
    k2 = velocity(x + 0.5 * dt * k1)
    k3 = velocity(x + 0.5 * dt * k2)
    k4 = velocity(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance(x, dt, velocity, min_dt, t_now):
    """One interval of size dt, recursively halved on ordering violations."""
    try:
        y = _rk4_step(x, dt, velocity)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state near t={t_now:.6g}")
        if np.all(np.diff(y) > 0.0):
            return y
    except _Unordered:
        pass
    if 0.5 * dt < min_dt:
        widths = np.diff(x)
        cell = int(np.argmin(widths))
        raise StepUnderflow(
            f"step underflow at t={t_now:.6g}: cell {cell} (width "
            f"{widths[cell]:.3e}) keeps violating ordering")
    mid = _advance(x, 0.5 * dt, velocity, min_dt, t_now)
    return _advance(mid, 0.5 * dt, velocity, min_dt, t_now + 0.5 * dt)


def default_dt(state: ParticleState, problem: Problem) -> float:
    """CFL-style guard: a tenth of the minimum cell-crossing time."""
    f = forces_for(state, problem)
    fmax = float(np.max(np.abs(f.values)))
    speed = problem.mobility.beta_max * fmax
    if speed <= 0:
        return 1e-3
    return min(1e-3, 0.1 * (state.h / problem.M) / speed)


# Dormand-Prince 5(4) coefficients
_DP_A = [
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


def _integrate_rk45(x, t_end, velocity, tol, min_dt, store_every):
    t = 0.0
    dt = min(1e-2, t_end / 10.0)
    times, states, vels = [0.0], [x.copy()], [velocity(x)]
    accepted = 0
    while t < t_end:
        dt = min(dt, t_end - t)
        try:
            k = [velocity(x)]
            for row in _DP_A[1:]:
                xi = x + dt * sum(a * ki for a, ki in zip(row, k))
                k.append(velocity(xi))
            k = np.array(k)
            x5 = x + dt * (_DP_B5 @ k)
            err = dt * ((_DP_B5 - _DP_B4) @ k)
            scale = tol * (1.0 + np.max(np.abs(x)))
            err_norm = float(np.max(np.abs(err))) / scale
            ordered = np.all(np.diff(x5) > 0.0) and np.all(np.isfinite(x5))
        except _Unordered:
            err_norm, ordered = np.inf, False
        if err_norm <= 1.0 and ordered:
            t += dt
            x = x5
            accepted += 1
            if accepted % store_every == 0 or t >= t_end:
                times.append(t)
                states.append(x.copy())
                vels.append(velocity(x))
            dt *= min(5.0, max(0.2, 0.9 * err_norm ** -0.2 if err_norm > 0 else 5.0))
        else:
            dt *= 0.5 if not np.isfinite(err_norm) \
                else min(0.9, max(0.2, 0.9 * err_norm ** -0.2))
            if dt < min_dt:
                raise StepUnderflow(f"adaptive step underflow at t={t:.6g}")
    return times, states, vels


def integrate(initial: ParticleState, problem: Problem, t_end: float,
              scheme: str = "rk4", dt: float | None = None,
              tol: float = 1e-8, store_every: int = 1) -> Trajectory:
    """Evolve the particle system to ``t_end``.

    ``rk4`` takes fixed steps (default chosen by the CFL guard), storing
    every ``store_every``-th step; a step that would disorder the particles
    is halved down to ``1e-12 * t_end`` before giving up.  ``rk45`` is the
    adaptive alternative with local error control.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    x0 = np.asarray(initial.positions, dtype=float)
    if np.any(np.diff(x0) <= 0):
        raise ValueError("initial particles must be strictly increasing")
    h = initial.h
    min_dt = 1e-12 * t_end

    def velocity(x):
        return _velocity(x, h, problem)

    if scheme == "rk4":
        if dt is None:
            dt = default_dt(initial, problem)
        n_steps = max(1, int(round(t_end / dt)))
        dt = t_end / n_steps
        times = [0.0]
        states = [x0.copy()]
        vels = [velocity(x0)]
        x = x0
        for step in range(n_steps):
            x = _advance(x, dt, velocity, min_dt, step * dt)
            if (step + 1) % store_every == 0 or step + 1 == n_steps:
                times.append((step + 1) * dt)
                states.append(x.copy())
                vels.append(velocity(x))
    elif scheme == "rk45":
        if not (1e-12 < tol < 1e-2):
            raise ValueError("tolerance must lie in (1e-12, 1e-2)")
        times, states, vels = _integrate_rk45(
            x0, t_end, velocity, tol, min_dt, store_every)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    return Trajectory(np.array(times), np.array(states), np.array(vels),
                      h=h, problem=problem, scheme=scheme)


@dataclass(frozen=True)
class CellBoundReport:
    min_width_ratio: float            # min over time of min_i width * M / h
    max_width_ratio: float | None     # max over time of max_i width * sigma / h
    growth_bound: float | None        # e^(mu T) with mu slightly above c_f * beta_max

    @property
    def lower_bound_ok(self) -> bool:
        return self.min_width_ratio >= 1.0 - 1e-6


def check_cell_bounds(traj: Trajectory, problem: Problem) -> CellBoundReport:
    """Width bounds along the trajectory, scaled to their guaranteed limits."""
    widths = traj.widths()
    h = traj.h
    min_ratio = float(np.min(widths) * problem.M / h)
    sigma = problem.initial.lower_bound
    if sigma > 0:
        max_ratio = float(np.max(widths) * sigma / h)
        mu = problem.c_force * problem.mobility.beta_max * 1.01
        growth = float(np.exp(mu * traj.times[-1]))
    else:
        max_ratio, growth = None, None
    return CellBoundReport(min_ratio, max_ratio, growth)
