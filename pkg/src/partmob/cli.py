"""Command-line driver: config parsing, run orchestration, CSV emission.

Configs are flat ``key = value`` text files with dotted section keys, e.g.::

    problem.W.kind = newtonian_attractive
    problem.initial.kind = parabolic_bump
    discretization.N = 200
    discretization.t_end = 1.0

Subcommands: ``run``, ``converge``, ``oracle-compare``, ``entropy-check``,
``edb-check``.  Exit codes: 0 ok, 1 usage/config error, 2 invariant
violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

from . import diagnostics as diag
from . import fv as fvmod
from . import variational as var
from .model import (InvalidProblem, Potentials, Problem, linear_potential,
                    morse, newtonian, no_interaction, parabolic_bump,
                    piecewise_constant_density, power_cap_mobility,
                    quadratic_potential, tabulated_mobility, uniform_density,
                    validate, zero_potential)
from .quantile import quantile_partition
from .reconstruct import ReconstructedFields, write_snapshots_csv
from .solver import NonFiniteState, StepUnderflow, default_dt, integrate

__all__ = ["main", "parse_config", "build_problem", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return [_parse_value(part) for part in raw.split(",") if part.strip()]
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config(path) -> dict:
    cfg: dict = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got "
                              f"{line.strip()!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        cfg[key] = _parse_value(raw)
    return cfg


def apply_overrides(cfg: dict, overrides) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, _, raw = item.partition("=")
        cfg[key.strip()] = _parse_value(raw)
    return cfg


def _get(cfg, key, default=None, required=False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"missing required config key {key!r}")
    return default


def _as_list(value):
    if value is None:
        return []
    return value if isinstance(value, list) else [value]


def build_problem(cfg: dict) -> Problem:
    mob_kind = _get(cfg, "problem.mobility.kind", "power_cap")
    if mob_kind == "power_cap":
        mobility = power_cap_mobility(
            m_beta=float(_get(cfg, "problem.mobility.M_beta", 1.0)),
            gamma=float(_get(cfg, "problem.mobility.gamma", 1.0)))
    elif mob_kind == "tabulated":
        mobility = tabulated_mobility(
            np.asarray(_as_list(_get(cfg, "problem.mobility.samples",
                                     required=True)), dtype=float),
            np.asarray(_as_list(_get(cfg, "problem.mobility.values",
                                     required=True)), dtype=float))
    else:
        raise ConfigError(f"unknown mobility kind {mob_kind!r}")

    v_kind = _get(cfg, "problem.V.kind", "zero")
    if v_kind == "zero":
        external = zero_potential()
    elif v_kind == "linear":
        external = linear_potential(float(_get(cfg, "problem.V.coeff", 1.0)))
    elif v_kind == "quadratic":
        external = quadratic_potential(float(_get(cfg, "problem.V.coeff", 1.0)))
    else:
        raise ConfigError(f"unknown external potential kind {v_kind!r}")

    w_kind = _get(cfg, "problem.W.kind", "zero")
    if w_kind == "zero":
        interaction = no_interaction()
    elif w_kind == "newtonian_attractive":
        interaction = newtonian(attractive=True)
    elif w_kind == "newtonian_repulsive":
        interaction = newtonian(attractive=False)
    elif w_kind == "morse":
        interaction = morse(float(_get(cfg, "problem.W.c_A", required=True)),
                            float(_get(cfg, "problem.W.ell_A", required=True)),
                            float(_get(cfg, "problem.W.c_R", required=True)),
                            float(_get(cfg, "problem.W.ell_R", required=True)))
    else:
        raise ConfigError(f"unknown interaction kind {w_kind!r}")

    declared_mass = _get(cfg, "problem.m", None)
    declared_mass = None if declared_mass is None else float(declared_mass)
    init_kind = _get(cfg, "problem.initial.kind", "parabolic_bump")
    if init_kind == "parabolic_bump":
        initial = parabolic_bump(
            amplitude=float(_get(cfg, "problem.initial.amplitude", 0.75)),
            center=float(_get(cfg, "problem.initial.center", 0.0)),
            radius=float(_get(cfg, "problem.initial.radius", 1.0)),
            mass=declared_mass)
    elif init_kind == "uniform":
        initial = uniform_density(
            a=float(_get(cfg, "problem.initial.a", 0.0)),
            b=float(_get(cfg, "problem.initial.b", 1.0)),
            height=float(_get(cfg, "problem.initial.height", 1.0)),
            mass=declared_mass)
    elif init_kind == "piecewise_constant":
        initial = piecewise_constant_density(
            _as_list(_get(cfg, "problem.initial.breakpoints", required=True)),
            _as_list(_get(cfg, "problem.initial.values", required=True)),
            mass=declared_mass)
    else:
        raise ConfigError(f"unknown initial density kind {init_kind!r}")

    return Problem(mobility, Potentials(external, interaction), initial)


def _discretization(cfg):
    n_cells = int(_get(cfg, "discretization.N", required=True))
    if n_cells < 2:
        raise ConfigError("discretization.N must be at least 2")
    t_end = float(_get(cfg, "discretization.t_end", 1.0))
    if t_end <= 0:
        raise ConfigError("discretization.t_end must be positive")
    scheme = _get(cfg, "discretization.integrator", "rk4")
    dt = _get(cfg, "discretization.dt", None)
    tol = float(_get(cfg, "discretization.tolerance", 1e-8))
    store_every = int(_get(cfg, "discretization.output_every", 1))
    return n_cells, t_end, scheme, (None if dt is None else float(dt)), tol, store_every


def run_trajectory(cfg: dict):
    problem = validate(build_problem(cfg))
    n_cells, t_end, scheme, dt, tol, store_every = _discretization(cfg)
    state0 = quantile_partition(problem.initial, n_cells)
    traj = integrate(state0, problem, t_end, scheme=scheme, dt=dt, tol=tol,
                     store_every=store_every)
    fields = ReconstructedFields.from_trajectory(traj)
    return problem, traj, fields


def check_invariants(problem: Problem, traj, fields) -> list[str]:
    violations = []
    masses = np.array([fields.mass_at(float(t)) for t in fields.times])
    worst = float(np.max(np.abs(masses - fields.mass))) / fields.mass
    if worst > 1e-12:
        violations.append(f"mass drift {worst:.3e} exceeds 1e-12 relative")
    widths = traj.widths()
    if np.any(widths <= 0):
        violations.append("particle ordering lost at a stored time")
    min_ratio = float(np.min(widths) * problem.M / traj.h)
    if min_ratio < 1.0 - 1e-6:
        violations.append(f"cell width ratio {min_ratio:.9f} fell below "
                          "the guaranteed lower bound")
    max_rho = float(np.max(traj.densities()))
    if max_rho > problem.M * (1.0 + 1e-9):
        violations.append(f"max density {max_rho:.9g} exceeds the uniform "
                          f"bound {problem.M:.9g}")
    return violations


def _out_dir(cfg, args) -> Path:
    out = args.out_dir or _get(cfg, "output.dir", "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _aligned_run(problem, n_cells, t_end, n_out=100, dt_cap=1e-3):
    """Fixed-step run whose stored times are exactly linspace(0, t_end,
    n_out+1), shared across refinement levels."""
    state0 = quantile_partition(problem.initial, n_cells)
    dt_target = min(dt_cap, default_dt(state0, problem))
    per_out = max(1, int(np.ceil((t_end / n_out) / dt_target)))
    dt = (t_end / n_out) / per_out
    traj = integrate(state0, problem, t_end, scheme="rk4", dt=dt,
                     store_every=per_out)
    return traj, ReconstructedFields.from_trajectory(traj)


def space_time_l1(fields_a, fields_b) -> float:
    """``int_0^T ||rho_a(t) - rho_b(t)||_L1 dt`` on the shared stored grid."""
    if len(fields_a.times) != len(fields_b.times) or \
            np.max(np.abs(fields_a.times - fields_b.times)) > 1e-9:
        raise ValueError("refinement runs must share their output times")
    dists = np.array([
        fvmod.l1_distance(fields_a.edges[k], fields_a.densities[k],
                          fields_b.edges[k], fields_b.densities[k])
        for k in range(len(fields_a.times))])
    return float(simpson(dists, x=fields_a.times))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run(cfg, args) -> int:
    problem, traj, fields = run_trajectory(cfg)
    out = _out_dir(cfg, args)
    write_snapshots_csv(fields, out / "snapshots.csv")
    norm_toggles = [_get(cfg, f"diagnostics.{key}", True)
                    for key in ("bv", "h1", "w1")]
    if any(norm_toggles):
        diag.write_diagnostics_csv(diag.diagnostics_records(fields, problem),
                                   out / "diagnostics.csv")
    if _get(cfg, "diagnostics.edb", True):
        var.write_gradient_csv(var.gradient_records(traj, fields),
                               out / "variational.csv")
    violations = check_invariants(problem, traj, fields)
    if violations:
        for v in violations:
            print(f"invariant violation: {v}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"run ok: {len(fields.times)} stored times, outputs in {out}")
    return EXIT_OK


def cmd_converge(cfg, args) -> int:
    problem = validate(build_problem(cfg))
    _, t_end, _, dt, _, _ = _discretization(cfg)
    n_list = [int(n) for n in
              _as_list(_get(cfg, "discretization.N_list", [50, 100, 200, 400]))]
    if any(2 * a != b for a, b in zip(n_list[:-1], n_list[1:])):
        raise ConfigError("discretization.N_list entries must double")
    out = _out_dir(cfg, args)
    # refinement runs are independent; fan them out, collect keyed by N so
    # the table is deterministic regardless of completion order
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=min(4, len(n_list))) as pool:
        futures = {n: pool.submit(_aligned_run, problem, n, t_end, 100,
                                  dt if dt else 1e-3)
                   for n in n_list}
        runs = {n: fut.result() for n, fut in futures.items()}
    rows = []
    for a, b in zip(n_list[:-1], n_list[1:]):
        traj_a, fields_a = runs[a]
        cauchy = space_time_l1(fields_a, runs[b][1])
        bv_max = max(diag.bv_norm(fields_a, float(t)) for t in fields_a.times)
        edb = var.edb_residual(traj_a)
        rows.append((a, cauchy, bv_max, edb))
    with open(out / "refinement.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("N", "cauchy_diff", "bv_max", "edb_residual"))
        for n, cauchy, bv_max, edb in rows:
            w.writerow([n, repr(cauchy), repr(bv_max), repr(edb)])
    for n, cauchy, bv_max, edb in rows:
        print(f"N={n:5d}  cauchy={cauchy:.6e}  bv_max={bv_max:.6g}  "
              f"edb={edb:.3e}")
    diffs = [r[1] for r in rows]
    if any(d2 >= d1 for d1, d2 in zip(diffs[:-1], diffs[1:])):
        print("warning: refinement differences are not strictly decreasing",
              file=sys.stderr)
    return EXIT_OK


def cmd_oracle_compare(cfg, args) -> int:
    problem, traj, fields = run_trajectory(cfg)
    _, t_end, *_ = _discretization(cfg)
    dx = float(_get(cfg, "oracle.fv_dx", 1e-3))
    lo = _get(cfg, "oracle.window_lo", None)
    hi = _get(cfg, "oracle.window_hi", None)
    if lo is None or hi is None:
        pad = 1.0 + problem.mobility.beta_max * t_end
        lo = problem.initial.x_min - pad
        hi = problem.initial.x_max + pad
    compare_times = [float(t) for t in
                     _as_list(_get(cfg, "oracle.compare_times", [t_end]))]
    _, fv_fields = fvmod.fv_solve(problem, (float(lo), float(hi)), dx, t_end,
                                  store_times=compare_times)
    out = _out_dir(cfg, args)
    rows = []
    for t in compare_times:
        err = fvmod.l1_compare(fields, fv_fields, t)
        rows.append((t, err))
        print(f"t={t:.4g}  l1_error={err:.6e}")
    with open(out / "oracle_compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "l1_error"))
        for t, err in rows:
            w.writerow([repr(float(t)), repr(float(err))])
    return EXIT_OK


def cmd_entropy_check(cfg, args) -> int:
    problem, traj, fields = run_trajectory(cfg)
    _, t_end, *_ = _discretization(cfg)
    cap = problem.mobility.cap
    c_values = [float(c) for c in
                _as_list(_get(cfg, "diagnostics.entropy.c",
                              [0.25 * cap, 0.5 * cap, 0.75 * cap]))]
    n_phi = int(_get(cfg, "diagnostics.entropy.phi_grid", 9))
    n_centers = max(1, int(round(n_phi / 3)))
    pad = problem.mobility.beta_max * t_end
    phis = diag.standard_bump_grid(t_end, problem.initial.x_min - pad,
                                   problem.initial.x_max + pad,
                                   n_centers=n_centers)
    stride = max(1, len(fields.times) // 400)
    rows = diag.entropy_report(fields, problem, c_values, phis,
                               time_stride=stride)
    out = _out_dir(cfg, args)
    diag.write_entropy_csv(rows, out / "entropy.csv")
    worst = min(r[2] for r in rows)
    print(f"entropy residuals: min={worst:.6e} over {len(rows)} cases")
    tol = float(_get(cfg, "diagnostics.entropy.tol", 1e-2))
    if worst < -tol:
        print(f"invariant violation: entropy residual {worst:.3e} below "
              f"-{tol:g}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_edb_check(cfg, args) -> int:
    problem, traj, fields = run_trajectory(cfg)
    out = _out_dir(cfg, args)
    var.write_gradient_csv(var.gradient_records(traj, fields),
                           out / "variational.csv")
    residual = var.edb_residual(traj)
    energies0 = var.free_energy(traj.state_at(0), problem.potentials)
    tol = 1e-6 * (abs(energies0) + 1.0)

    cfg_half = dict(cfg)
    n_cells, t_end, scheme, dt, tol_i, store_every = _discretization(cfg)
    if dt is None:
        dt = default_dt(quantile_partition(problem.initial, n_cells), problem)
    cfg_half["discretization.dt"] = dt / 2.0
    _, traj_half, _ = run_trajectory(cfg_half)
    residual_half = var.edb_residual(traj_half)
    ratio = residual / residual_half if residual_half > 0 else float("inf")
    print(f"edb residual: {residual:.6e} (tolerance {tol:.3e})")
    print(f"half-step residual: {residual_half:.6e}  ratio={ratio:.2f}")
    if residual > tol:
        print("invariant violation: energy balance residual above tolerance",
              file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partmob",
        description="Particle and finite-volume solvers for 1D nonlocal "
                    "transport with nonlinear mobility")
    parser.add_argument("--config", required=True, help="config file path")
    parser.add_argument("--out-dir", default=None, help="output directory")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config entry")
    parser.add_argument("command",
                        choices=["run", "converge", "oracle-compare",
                                 "entropy-check", "edb-check"])
    return parser


_COMMANDS = {
    "run": cmd_run,
    "converge": cmd_converge,
    "oracle-compare": cmd_oracle_compare,
    "entropy-check": cmd_entropy_check,
    "edb-check": cmd_edb_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = parse_config(args.config)
        apply_overrides(cfg, args.override)
        return _COMMANDS[args.command](cfg, args)
    except (StepUnderflow, NonFiniteState, fvmod.CflViolation) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, InvalidProblem, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
