"""Executable checks of the decay, boundedness and limit estimates for DSM flows.

Every check returns a :class:`CheckRecord`. Margins are normalized so that a
record passes exactly when ``worst_margin >= -tolerance_used``; a negative
margin means the bound was exceeded. ``inconclusive`` is a separate status
used when the data cannot decide the question (too few samples, horizon
too short, unconverged inputs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .hilbert import norm
from .integrator import Trajectory

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

NOISE_FLOOR = 1e-12
"""Absolute scale below which exponential bounds are compared additively (round-off)."""

MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class CheckRecord:
    check_name: str
    passed: bool
    worst_margin: float
    location: float
    tolerance_used: float
    status: str = PASS
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "check_name": self.check_name,
            "passed": self.passed,
            "worst_margin": _json_float(self.worst_margin),
            "location": _json_float(self.location),
            "tolerance_used": self.tolerance_used,
            "status": self.status,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _json_float(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return float(x)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return _json_float(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass(frozen=True, eq=False)
class RegPathPoint:
    eps: float
    V_eps: np.ndarray
    residual: float
    converged: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")


@dataclass(frozen=True)
class DiagnosticsReport:
    records: tuple

    @property
    def overall(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self) -> dict:
        return {"overall": self.overall, "records": [r.to_dict() for r in self.records]}


def _record(name, margins, locations, tol, details=None, skip_first=False) -> CheckRecord:
    margins = np.asarray(margins, dtype=float)
    # the t=0 entry of a decay bound holds with equality by construction
    offset = 1 if skip_first and margins.size > 1 else 0
    k = offset + int(np.argmin(margins[offset:]))
    worst = float(margins[k])
    passed = worst >= -tol
    return CheckRecord(name, passed, worst, float(locations[k]), tol,
                       PASS if passed else FAIL, details or {})


def inconclusive(name, tol, reason) -> CheckRecord:
    return CheckRecord(name, False, math.nan, math.nan, tol, INCONCLUSIVE, {"reason": reason})


def _relative_margins(bound, observed):
    """``(bound - observed) / max(bound, floor)``: >= -tol iff observed <= bound(1+tol),
    up to the round-off floor."""
    bound = np.asarray(bound, dtype=float)
    observed = np.asarray(observed, dtype=float)
    return (bound - observed) / np.maximum(bound, NOISE_FLOOR)


def _require_constant(traj: Trajectory, eps: float):
    if not traj.is_constant_eps():
        raise ValueError("check requires a constant-eps trajectory")
    if not math.isclose(traj.eps[0], eps, rel_tol=1e-12):
        raise ValueError(f"trajectory eps {traj.eps[0]} differs from requested eps {eps}")


def check_shift_decay(traj: Trajectory, eps: float, h: float, tol: float = 1e-3,
                      min_pairs: int = 3) -> CheckRecord:
    """``||w(t+h) - w(t)|| <= ||w(h) - w(0)|| e^{-eps t} (1 + tol)`` at every sample
    for which ``t + h`` is also a sample."""
    name = f"shift_decay[h={h:g}]"
    _require_constant(traj, eps)
    if not h > 0:
        raise ValueError("h must be > 0")
    if traj.index_at(h) is None:
        return inconclusive(name, tol, f"h={h} is not a multiple of the sample spacing")
    ts, gs = [], []
    for i, t in enumerate(traj.times):
        j = traj.index_at(t + h)
        if j is None:
            if t + h > traj.times[-1]:
                break
            return inconclusive(name, tol, f"no sample at t+h={t + h}")
        ts.append(t)
        gs.append(norm(traj.states[j] - traj.states[i]))
    if len(ts) < min_pairs:
        return inconclusive(name, tol, f"only {len(ts)} shifted pairs available")
    ts, gs = np.array(ts), np.array(gs)
    bound = gs[0] * np.exp(-eps * ts)
    return _record(name, _relative_margins(bound, gs), ts, tol,
                   {"h": h, "g0": gs[0], "pairs": len(ts)}, skip_first=True)


def check_derivative_decay(traj: Trajectory, eps: float, tol: float = 1e-3) -> CheckRecord:
    """``residual(t) <= residual(0) e^{-eps t} (1 + tol)``; the residual equals ``||w'(t)||``."""
    name = "derivative_decay"
    _require_constant(traj, eps)
    r = traj.residuals
    if len(r) < 2:
        return inconclusive(name, tol, "fewer than two samples")
    bound = r[0] * np.exp(-eps * traj.times)
    return _record(name, _relative_margins(bound, r), traj.times, tol, {"residual0": r[0]},
                   skip_first=True)


def check_contraction(traj_a: Trajectory, traj_b: Trajectory, eps: float,
                      tol: float = 1e-3) -> CheckRecord:
    """``||A(t) - B(t)|| <= ||A(0) - B(0)|| e^{-eps t} (1 + tol)`` at shared sample times."""
    name = "contraction"
    _require_constant(traj_a, eps)
    _require_constant(traj_b, eps)
    if traj_a.dimension != traj_b.dimension:
        raise ValueError("trajectories have different dimensions")
    ts, gaps = [], []
    for i, t in enumerate(traj_a.times):
        j = traj_b.index_at(t)
        if j is not None:
            ts.append(t)
            gaps.append(norm(traj_a.states[i] - traj_b.states[j]))
    if len(ts) < 2 or ts[0] != 0.0:
        return inconclusive(name, tol, "trajectories share fewer than two sample times")
    ts, gaps = np.array(ts), np.array(gaps)
    bound = gaps[0] * np.exp(-eps * ts)
    return _record(name, _relative_margins(bound, gaps), ts, tol,
                   {"gap0": gaps[0], "shared_samples": len(ts),
                    "limit_gap": norm(traj_a.final_state - traj_b.final_state)},
                   skip_first=True)


def check_norm_bound(V_eps, y, tol: float = 1e-3, atol: Optional[float] = None) -> CheckRecord:
    """``||V_eps|| <= ||y|| (1 + tol) + atol`` (``atol`` defaults to ``tol``)."""
    atol = tol if atol is None else atol
    nv, ny = norm(V_eps), norm(y)
    scale = ny + atol / tol
    margin = (ny - nv) / scale
    return _record("norm_bound", [margin], [0.0], tol,
                   {"norm_V_eps": nv, "norm_y": ny, "atol": atol})


def check_regpath_convergence(path: Sequence[RegPathPoint], y, final_tol: float = 1e-2,
                              norm_tol: float = 1e-3, solver_tol: Optional[float] = None
                              ) -> CheckRecord:
    """``||V_eps - y||`` nonincreasing along decreasing ``eps``, final value
    ``<= final_tol``, and ``||V_eps|| <= ||y||`` at every point.

    The monotonicity slack is 1e-9 plus the certified solver error
    ``residual / eps`` of the two points being compared.
    """
    name = "regpath_convergence"
    if len(path) < 3:
        return inconclusive(name, final_tol, "need at least three path points")
    eps = [p.eps for p in path]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("path must be ordered by strictly decreasing eps")
    bad = [p.eps for p in path
           if not p.converged or (solver_tol is not None and p.residual > solver_tol)]
    if bad:
        return inconclusive(name, final_tol, f"unconverged path points at eps={bad}")
    y = np.asarray(y, dtype=float)
    errors = np.array([norm(p.V_eps - y) for p in path])
    # sub-conditions are mapped onto the final_tol scale: m/tol_sub*final_tol
    margins, where = [-errors[-1]], [len(path) - 1]
    # B + eps I is eps-strongly monotone, so ||V - V_eps|| <= residual / eps certifies each point
    certified = np.array([p.residual / p.eps for p in path])
    for k in range(1, len(path)):
        slack = MONOTONE_SLACK + certified[k - 1] + certified[k]
        margins.append((errors[k - 1] - errors[k]) / slack * final_tol)
        where.append(k)
    for k, p in enumerate(path):
        nb = check_norm_bound(p.V_eps, y, norm_tol)
        margins.append(nb.worst_margin / norm_tol * final_tol)
        where.append(k)
    return _record(name, margins, where, final_tol,
                   {"eps": eps, "errors": errors, "final_error": errors[-1],
                    "certified_point_error": certified})


def check_boundedness(traj: Trajectory, y, tol: float = 1e-3) -> CheckRecord:
    """``||u(t) - y|| <= max(||u0 - y||, ||y||) (1 + tol)`` at every sample."""
    name = "boundedness"
    if y is None:
        return inconclusive(name, tol, "no minimal-norm solution y available")
    y = np.asarray(y, dtype=float)
    q = np.sqrt(np.sum((traj.states - y) ** 2, axis=1))
    bound = max(q[0], norm(y))
    return _record(name, _relative_margins(np.full_like(q, bound), q), traj.times, tol,
                   {"bound": bound, "sup_q": q.max()}, skip_first=True)


def check_residual_vanishes(traj: Trajectory, window: float, tol: float = 1e-3,
                            c0: float = 1.0) -> CheckRecord:
    """Max residual over the final ``window`` of time is ``<= tol``.

    Also reports ``max residual(t) * t`` over the last decade ``[T/10, T]`` as
    the measured rate constant; it is reported, not asserted.
    """
    name = "residual_vanishes"
    T = float(traj.times[-1])
    if T < 10.0 * c0 or T < window:
        return inconclusive(name, tol, f"horizon T={T:g} too short (need >= max(10*c0, window))")
    last = traj.times >= T - window
    r = traj.residuals[last]
    k = int(np.argmax(r))
    decade = traj.times >= T / 10.0
    rate = float(np.max(traj.residuals[decade] * traj.times[decade]))
    return _record(name, [-r[k]], [traj.times[last][k]], tol,
                   {"window": window, "max_window_residual": r[k], "rate_constant": rate,
                    "final_residual": traj.residuals[-1]})


def check_solver_status(status: str) -> CheckRecord:
    """Fails only when the solver diverged."""
    ok = status != "diverged"
    return CheckRecord("solver_status", ok, 0.0 if ok else -math.inf, math.nan, 0.0,
                       PASS if ok else FAIL, {"status": status})
