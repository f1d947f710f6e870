"""Experiment orchestration and artifact persistence."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import __version__
from ..catalog import DEFAULT_SCHEDULE_NOTE, describe_catalog
from ..diagnostics import (
    FAIL,
    PASS,
    CheckRecord,
    DiagnosticsReport,
    RegPathPoint,
    check_boundedness,
    check_contraction,
    check_derivative_decay,
    check_norm_bound,
    check_regpath_convergence,
    check_residual_vanishes,
    check_shift_decay,
    check_solver_status,
    inconclusive,
)
from ..errors import NoOracleError
from ..hilbert import minimal_norm_oracle, monotonicity_probe, norm
from ..integrator import CauchyProblem, IntegratorConfig, StopCriteria, Trajectory, solve_cauchy
from ..peano import default_dt, peano_gap, peano_limit, peano_trajectory
from ..schedule import EpsilonSchedule
from .config import ExperimentConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunArtifacts:
    run_dir: Path
    trajectory_csv: Optional[Path]
    summary_json: Path
    diagnostics_json: Path
    config_echo: Path
    overall: bool
    summary: dict

    @property
    def exit_code(self) -> int:
        return 0 if self.overall else 1


def resolve_minimal_norm(op):
    """``(y, tag)``; ``y`` is None when no solution exists or no oracle applies."""
    ks = op.known_solution_set
    if ks is not None:
        if not ks.has_solution:
            return None, f"{ks.oracle_tag}: no solution"
        if ks.minimal_norm_y is not None:
            return ks.y(), ks.oracle_tag
    try:
        y = minimal_norm_oracle(op)
    except NoOracleError as exc:
        return None, f"no oracle: {exc}"
    if y is None:
        return None, "oracle: no solution"
    return y, "lstsq-min-norm" if op.spec.family in ("linear", "affine") else "bisection"


# -- file writers --------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(path: Path, traj: Trajectory):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"state_{i}" for i in range(traj.dimension)] + ["residual", "eps"])
        for t, s, r, e in zip(traj.times, traj.states, traj.residuals, traj.eps):
            w.writerow([_fmt(t)] + [_fmt(v) for v in s] + [_fmt(r), _fmt(e)])


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(data[:, 0], data[:, 1:-2], data[:, -2], data[:, -1])


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _prepare_dir(config: ExperimentConfig, verb: str = "run") -> Path:
    name = config.run_id if verb == "run" else f"{config.run_id}.{verb}"
    run_dir = Path(config.output_dir) / name
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.toml").write_text(config.echo_text())
    return run_dir


def _base_summary(config: ExperimentConfig, kind: str) -> dict:
    y, tag = resolve_minimal_norm(config.operator)
    summary = {
        "solver": "monodsm",
        "version": __version__,
        "kind": kind,
        "run_id": config.run_id,
        "config_echo": "config.toml",
        "config_sha256": config.config_hash(),
        "operator": {
            "name": config.operator.name,
            "dimension": config.operator.dimension,
            **config.operator.spec.to_dict(),
        },
        "schedule": config.schedule.to_dict(),
        "integrator": {
            "method": config.integrator.method,
            "dt": config.integrator.dt,
            "t_max": config.integrator.t_max,
            "safety": config.integrator.safety,
            "local_tol": config.integrator.local_tol,
            "max_step": config.integrator.max_step,
        },
        "tolerances": {
            "residual_tol": config.stop.residual_tol,
            "divergence_bound": config.stop.divergence_bound,
            "checks": {c.name: c.tol for c in config.checks},
        },
        "minimal_norm_y": None if y is None else list(y),
        "oracle": tag,
    }
    if config.schedule.uses_default_parameters():
        summary["schedule_note"] = DEFAULT_SCHEDULE_NOTE
    return summary


# -- run ----------------------------------------------------------------------


def _run_checks(config: ExperimentConfig, problem: CauchyProblem, traj: Trajectory,
                report, y) -> list:
    records = [check_solver_status(report.status)]
    sched = config.schedule
    const_eps = sched.eps_value if sched.is_constant else None
    for spec in config.checks:
        name, tol, p = spec.name, spec.tol, spec.params
        needs_constant = name in ("shift_decay", "derivative_decay", "contraction", "norm_bound")
        if needs_constant and const_eps is None:
            records.append(inconclusive(name, tol, "requires a constant eps schedule"))
            continue
        if name == "shift_decay":
            records.extend(check_shift_decay(traj, const_eps, h, tol) for h in p["h"])
        elif name == "derivative_decay":
            records.append(check_derivative_decay(traj, const_eps, tol))
        elif name == "contraction":
            offset = p.get("offset", 5.0)
            other = problem.with_initial(problem.initial + offset)
            stop = StopCriteria(config.stop.residual_tol,
                                max(config.stop.divergence_bound, 2 * norm(other.initial) + 1))
            traj_b, _ = solve_cauchy(other, config.integrator, stop)
            records.append(check_contraction(traj, traj_b, const_eps, tol))
        elif name == "norm_bound":
            if y is None:
                records.append(inconclusive(name, tol, "no minimal-norm solution y available"))
            elif report.status != "converged":
                records.append(inconclusive(name, tol, f"solver status {report.status}"))
            else:
                records.append(check_norm_bound(report.limit_estimate, y, tol, p.get("atol")))
        elif name == "boundedness":
            records.append(check_boundedness(traj, y, tol))
        elif name == "residual_vanishes":
            window = p.get("window", 0.1 * float(traj.times[-1]))
            c0 = sched.c0 if not sched.is_constant else 0.0
            records.append(check_residual_vanishes(traj, window, tol, c0=c0))
    return records


def run(config: ExperimentConfig) -> RunArtifacts:
    """Solve the configured Cauchy problem, run the requested checks and write
    ``trajectory.csv``, ``summary.json``, ``diagnostics.json`` and ``config.toml``."""
    run_dir = _prepare_dir(config)
    problem = config.problem()
    traj, report = solve_cauchy(problem, config.integrator, config.stop)
    y, _ = resolve_minimal_norm(config.operator)
    records = _run_checks(config, problem, traj, report, y)
    diag = DiagnosticsReport(tuple(records))

    write_trajectory_csv(run_dir / "trajectory.csv", traj)
    summary = _base_summary(config, "run")
    summary.update({
        "status": report.status,
        "limit": list(report.limit_estimate),
        "final_residual": report.final_residual,
        "steps_taken": report.steps_taken,
        "final_time": report.final_time,
        "wall_notes": report.wall_notes,
        "samples": len(traj),
        "diagnostics_overall": diag.overall,
        "exit_code": 0 if diag.overall else 1,
    })
    if y is not None:
        summary["error_to_y"] = norm(report.limit_estimate - y)
    summary = _clean(summary)
    _write_json(run_dir / "summary.json", summary)
    _write_json(run_dir / "diagnostics.json", _clean(diag.to_dict()))
    log.info("run %s: %s, diagnostics %s", config.run_id, report.status,
             "pass" if diag.overall else "FAIL")
    return RunArtifacts(run_dir, run_dir / "trajectory.csv", run_dir / "summary.json",
                        run_dir / "diagnostics.json", run_dir / "config.toml", diag.overall, summary)


# -- sweep over eps -------------------------------------------------------------


def sweep_eps(config: ExperimentConfig, eps_list: Optional[Sequence[float]] = None) -> RunArtifacts:
    """Solve ``B(v) + eps v = 0`` by the constant-eps flow for each ``eps`` and check
    the regularization path against the minimal-norm solution."""
    if not config.schedule.is_constant:
        raise ValueError("sweep-eps requires a constant-schedule config")
    eps_list = list(eps_list if eps_list is not None else (config.sweep["eps"] or []))
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ValueError("eps list must be nonempty with all entries > 0")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")

    run_dir = _prepare_dir(config, "sweep-eps")
    y, _ = resolve_minimal_norm(config.operator)
    points, rows = [], []
    for eps in eps_list:
        problem = CauchyProblem(config.operator, EpsilonSchedule.constant(eps), config.initial)
        _, rep = solve_cauchy(problem, config.integrator, config.stop)
        converged = rep.status == "converged"
        points.append(RegPathPoint(eps, rep.limit_estimate, rep.final_residual, converged))
        rows.append({
            "eps": eps,
            "norm_V_eps": norm(rep.limit_estimate),
            "error_to_y": norm(rep.limit_estimate - y) if y is not None else math.nan,
            "residual": rep.final_residual,
            "status": rep.status,
        })
        if not converged:
            log.warning("sweep point eps=%g did not converge (%s)", eps, rep.status)

    with open(run_dir / "regpath.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "norm_V_eps", "error_to_y", "residual", "status"])
        for r in rows:
            w.writerow([_fmt(r["eps"]), _fmt(r["norm_V_eps"]), _fmt(r["error_to_y"]),
                        _fmt(r["residual"]), r["status"]])

    final_tol, norm_tol = config.sweep["final_tol"], config.sweep["norm_tol"]
    records = []
    for p in points:
        if y is None:
            rec = inconclusive("norm_bound", norm_tol, "no minimal-norm solution y available")
        elif not p.converged:
            rec = inconclusive("norm_bound", norm_tol, "unconverged path point")
        else:
            rec = check_norm_bound(p.V_eps, y, norm_tol)
        records.append(_renamed(rec, f"norm_bound[eps={p.eps:g}]"))
    if y is None:
        records.append(inconclusive("regpath_convergence", final_tol, "no minimal-norm solution y"))
    else:
        records.append(check_regpath_convergence(points, y, final_tol, norm_tol,
                                                 solver_tol=config.stop.residual_tol))
    diag = DiagnosticsReport(tuple(records))

    summary = _base_summary(config, "sweep-eps")
    summary.update({
        "eps_list": eps_list,
        "table": rows,
        "final_tol": final_tol,
        "norm_tol": norm_tol,
        "diagnostics_overall": diag.overall,
        "exit_code": 0 if diag.overall else 1,
    })
    summary = _clean(summary)
    _write_json(run_dir / "summary.json", summary)
    _write_json(run_dir / "diagnostics.json", _clean(diag.to_dict()))
    return RunArtifacts(run_dir, None, run_dir / "summary.json", run_dir / "diagnostics.json",
                        run_dir / "config.toml", diag.overall, summary)


def _renamed(rec, name):
    return replace(rec, check_name=name)


# -- Peano comparison -----------------------------------------------------------


def _ode_on_grid(problem: CauchyProblem, config: ExperimentConfig, T: float, dt: float):
    cfg = IntegratorConfig("rk4", dt=dt, t_max=T, stride=1)
    stop = StopCriteria(residual_tol=1e-300, divergence_bound=config.stop.divergence_bound)
    traj, rep = solve_cauchy(problem, cfg, stop)
    return traj, rep


def _sup_discrepancy(run, traj: Trajectory) -> float:
    worst = 0.0
    final_t = traj.times[-1]
    for t, w in zip(run.times, run.states):
        if t > final_t:
            # flow stopped at an exact equilibrium; it stays there
            ref = traj.final_state
        else:
            j = traj.index_at(t)
            if j is None:
                continue
            ref = traj.states[j]
        worst = max(worst, norm(w - ref))
    return worst


def peano_compare(config: ExperimentConfig, n_schedule: Optional[Sequence[int]] = None) -> RunArtifacts:
    """Compare delayed-integral approximations with the RK4 flow on ``[0, T]``."""
    if not config.schedule.is_constant:
        raise ValueError("peano-compare requires a constant-schedule config "
                         "(the time-dependent delayed scheme is not implemented)")
    ns = list(n_schedule if n_schedule is not None else (config.peano["n"] or [10, 20, 40, 80, 160]))
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n schedule must be strictly increasing")
    T, gap_tol, per_delay = config.peano["T"], config.peano["gap_tol"], config.peano["per_delay"]
    run_dir = _prepare_dir(config, "peano-compare")

    op, eps = config.operator, config.schedule.eps_value

    def F(w):
        return op.evaluate_unchecked(w) + eps * w

    lcm = int(np.lcm.reduce(ns)) * per_delay
    ode_dt = min(config.integrator.dt, 1.0 / lcm) if lcm <= 100_000 else config.integrator.dt
    traj, _ = _ode_on_grid(config.problem(), config, T, ode_dt)

    rows, prev = [], None
    for n in ns:
        run_n = peano_trajectory(F, config.initial, n, T, default_dt(n, per_delay))
        gap = peano_gap(prev, run_n).g_sup if prev is not None else math.nan
        rows.append({"n": n, "dt": run_n.dt, "sup_discrepancy": _sup_discrepancy(run_n, traj),
                     "gap_to_previous": gap})
        prev = run_n
    limit = peano_limit(F, config.initial, T, ns, gap_tol, per_delay)
    agreement = _sup_discrepancy(limit.run, traj)

    with open(run_dir / "peano.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "dt", "sup_discrepancy", "gap_to_previous"])
        for r in rows:
            w.writerow([r["n"], _fmt(r["dt"]), _fmt(r["sup_discrepancy"]), _fmt(r["gap_to_previous"])])

    agree_tol = max(gap_tol, 10 * config.integrator.dt)
    records = [
        CheckRecord("peano_gap_converged", limit.converged,
                    gap_tol - limit.achieved_gap if math.isfinite(limit.achieved_gap) else -math.inf,
                    float(limit.run.n), 0.0, PASS if limit.converged else FAIL,
                    {"gaps": [list(g) for g in limit.gaps], "gap_tol": gap_tol}),
        CheckRecord("peano_agreement", agreement <= agree_tol, agree_tol - agreement, float(limit.run.n),
                    0.0, PASS if agreement <= agree_tol else FAIL,
                    {"sup_discrepancy": agreement, "bound": agree_tol}),
    ]
    diag = DiagnosticsReport(tuple(records))
    summary = _base_summary(config, "peano-compare")
    summary.update({
        "T": T,
        "n_schedule": ns,
        "ode_dt": ode_dt,
        "table": rows,
        "limit_n": limit.run.n,
        "achieved_gap": limit.achieved_gap,
        "partial": not limit.converged,
        "integral_residual": limit.integral_residual,
        "final_agreement": agreement,
        "diagnostics_overall": diag.overall,
        "exit_code": 0 if diag.overall else 1,
    })
    summary = _clean(summary)
    _write_json(run_dir / "summary.json", summary)
    _write_json(run_dir / "diagnostics.json", _clean(diag.to_dict()))
    return RunArtifacts(run_dir, None, run_dir / "summary.json", run_dir / "diagnostics.json",
                        run_dir / "config.toml", diag.overall, summary)


# -- catalog and probe -------------------------------------------------------------


def list_operators() -> list:
    return describe_catalog()


def probe(config: ExperimentConfig, samples: int, seed: int, radius: float = 10.0):
    return monotonicity_probe(config.operator, samples, radius, seed)
