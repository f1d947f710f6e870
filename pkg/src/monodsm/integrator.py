"""Explicit integration of the regularized flow ``u' = -B(u) - eps(t) u``.

With a constant schedule this is the flow whose limit solves
``B(v) + eps v = 0``; with a decaying power-law schedule the limit is the
minimal-norm solution of ``B(u) = 0`` (when one exists).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, OperatorOverflowError, StepSizeUnderflowError
from .hilbert import OperatorInstance, as_vec, norm
from .schedule import EpsilonSchedule

METHODS = ("euler", "rk4", "rk4-adaptive")
MAX_SAMPLES = 100_000


@dataclass(frozen=True, eq=False)
class CauchyProblem:
    operator: OperatorInstance
    schedule: EpsilonSchedule
    initial: np.ndarray

    def __post_init__(self):
        u0 = as_vec(self.initial)
        if u0.size != self.operator.dimension:
            raise DimensionError(
                f"initial state has dimension {u0.size}, operator has {self.operator.dimension}"
            )
        u0.setflags(write=False)
        object.__setattr__(self, "initial", u0)

    def with_initial(self, initial) -> "CauchyProblem":
        return CauchyProblem(self.operator, self.schedule, initial)

    def field(self) -> Callable[[float, np.ndarray], np.ndarray]:
        """The right-hand side as a fast closure (no dimension checks)."""
        evaluate = self.operator.evaluate_unchecked
        if self.schedule.is_constant:
            e = self.schedule.eps_value
            return lambda t, u: -evaluate(u) - e * u
        eps = self.schedule.eps
        return lambda t, u: -evaluate(u) - eps(t) * u


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    dt: float = 0.01
    t_max: float = 100.0
    safety: float = 0.9
    local_tol: float = 1e-8
    stride: Optional[int] = None
    max_step: float = 0.5
    """Adaptive-mode cap. Near an equilibrium the step-doubling estimate is tiny even
    for steps outside RK4's stability region, so growth must be bounded separately."""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_max > 0:
            raise ValueError("t_max must be > 0")
        if not self.local_tol > 0:
            raise ValueError("local_tol must be > 0")
        if not 0 < self.safety <= 1:
            raise ValueError("safety factor must lie in (0, 1]")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not self.max_step > 0:
            raise ValueError("max_step must be > 0")


@dataclass(frozen=True)
class StopCriteria:
    """Stop on ``||B(u) + eps(t) u|| <= residual_tol``, on ``||u|| > divergence_bound``,
    or at the horizon. ``t_max`` here, when given, caps the integrator's horizon."""

    residual_tol: float = 1e-8
    divergence_bound: float = 1e6
    t_max: Optional[float] = None

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be > 0")
        if not self.divergence_bound > 0:
            raise ValueError("divergence_bound must be > 0")
        if self.t_max is not None and not self.t_max > 0:
            raise ValueError("t_max must be > 0")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stored samples of one integration.

    ``residuals[i]`` is ``||B(states[i]) + eps(times[i]) states[i]||`` evaluated
    at the stored state.
    """

    times: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    eps: np.ndarray
    stride: int = 1

    def __post_init__(self):
        for name in ("times", "states", "residuals", "eps"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.states.ndim != 2 or len(self.states) != len(self.times):
            raise ValueError("states must be (n_samples, dimension)")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def is_constant_eps(self) -> bool:
        return bool(np.all(self.eps == self.eps[0]))

    def index_at(self, t: float, rtol: float = 1e-9) -> Optional[int]:
        """Index of the sample at time ``t`` (within ``rtol``), or None."""
        i = int(np.searchsorted(self.times, t))
        for j in (i - 1, i):
            if 0 <= j < len(self.times) and abs(self.times[j] - t) <= rtol * max(1.0, abs(t)):
                return j
        return None


@dataclass(frozen=True, eq=False)
class SolveReport:
    status: str
    limit_estimate: np.ndarray
    final_residual: float
    steps_taken: int
    final_time: float
    wall_notes: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "limit_estimate": [float(v) for v in self.limit_estimate],
            "final_residual": self.final_residual,
            "steps_taken": self.steps_taken,
            "final_time": self.final_time,
            "wall_notes": self.wall_notes,
        }


def rhs(problem: CauchyProblem, t: float, u) -> np.ndarray:
    """``-B(u) - eps(t) u``."""
    u = as_vec(u, problem.operator.dimension)
    return -problem.operator.evaluate_unchecked(u) - problem.schedule.eps(t) * u


def residual(problem: CauchyProblem, t: float, u) -> float:
    return norm(rhs(problem, t, u))


def step_euler(state, t, dt, f, k1=None):
    if k1 is None:
        k1 = f(t, state)
    return state + dt * k1


def step_rk4(state, t, dt, f, k1=None):
    """Classical four-stage Runge-Kutta step. ``k1`` may be passed in when the
    caller already evaluated ``f(t, state)``."""
    if k1 is None:
        k1 = f(t, state)
    half = 0.5 * dt
    k2 = f(t + half, state + half * k1)
    k3 = f(t + half, state + half * k2)
    k4 = f(t + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class _Recorder:
    def __init__(self, stride):
        self.stride = stride
        self.times, self.states, self.residuals, self.eps = [], [], [], []
        self.last_step = None

    def add(self, step, t, u, r, e, force=False):
        if self.last_step == step:
            return
        if force or step % self.stride == 0:
            self.times.append(t)
            self.states.append(u.copy())
            self.residuals.append(r)
            self.eps.append(e)
            self.last_step = step

    def build(self, dimension):
        states = np.array(self.states) if self.states else np.empty((0, dimension))
        return Trajectory(np.array(self.times), states, np.array(self.residuals),
                          np.array(self.eps), stride=self.stride)


def solve_cauchy(problem: CauchyProblem, cfg: IntegratorConfig = IntegratorConfig(),
                 stop: StopCriteria = StopCriteria()):
    """Integrate from ``t = 0`` until a stop criterion fires.

    The residual ``||B(u) + eps(t) u||`` is checked at every step (it is the
    norm of the first Runge-Kutta stage, so it costs nothing extra). Returns
    ``(Trajectory, SolveReport)``; status is ``converged``,
    ``horizon-reached`` or ``diverged``.

    Raises
    ------
    StepSizeUnderflowError
        In ``rk4-adaptive`` mode when the step size collapses.
    """
    u = np.array(problem.initial, dtype=float)
    if norm(u) >= stop.divergence_bound:
        raise ValueError("divergence_bound must exceed the initial norm")
    t_end = cfg.t_max if stop.t_max is None else min(cfg.t_max, stop.t_max)
    f = problem.field()
    eps = problem.schedule.eps
    adaptive = cfg.method == "rk4-adaptive"
    if cfg.stride is not None:
        stride = cfg.stride
    elif adaptive:
        stride = 1
    else:
        stride = max(1, math.ceil(t_end / cfg.dt / MAX_SAMPLES))
    rec = _Recorder(stride)

    t, k = 0.0, 0
    h = min(cfg.dt, t_end, cfg.max_step) if adaptive else min(cfg.dt, t_end)
    status, note = None, ""
    r = math.inf
    while True:
        try:
            k1 = f(t, u)
        except OperatorOverflowError as exc:
            status, note = "diverged", f"operator overflow at t={t:.6g}: {exc}"
            break
        r = norm(k1)
        if r <= stop.residual_tol:
            status = "converged"
        elif norm(u) > stop.divergence_bound:
            status, note = "diverged", f"||u|| exceeded {stop.divergence_bound:g} at t={t:.6g}"
        elif t >= t_end:
            status = "horizon-reached"
        if status is not None:
            rec.add(k, t, u, r, eps(t), force=True)
            break
        rec.add(k, t, u, r, eps(t))

        if not adaptive:
            t_next = min((k + 1) * cfg.dt, t_end)
            stepper = step_rk4 if cfg.method == "rk4" else step_euler
            try:
                u_next = stepper(u, t, t_next - t, f, k1)
            except OperatorOverflowError as exc:
                status, note = "diverged", f"operator overflow at t={t:.6g}: {exc}"
                rec.add(k, t, u, r, eps(t), force=True)
                break
        else:
            u_next, t_next, h = _adaptive_step(u, t, h, t_end, f, k1, cfg)
        if not np.all(np.isfinite(u_next)):
            status, note = "diverged", f"non-finite state after t={t:.6g}"
            rec.add(k, t, u, r, eps(t), force=True)
            break
        u, t, k = u_next, t_next, k + 1

    traj = rec.build(problem.operator.dimension)
    report = SolveReport(
        status=status,
        limit_estimate=traj.final_state.copy(),
        final_residual=float(r) if status != "diverged" or math.isfinite(r) else math.inf,
        steps_taken=k,
        final_time=float(traj.times[-1]),
        wall_notes=note,
    )
    return traj, report


def _adaptive_step(u, t, h, t_end, f, k1, cfg):
    """One accepted step-doubling RK4 step. Returns (state, time, next h)."""
    while True:
        h = min(h, t_end - t)
        try:
            big = step_rk4(u, t, h, f, k1)
            mid = step_rk4(u, t, 0.5 * h, f, k1)
            small = step_rk4(mid, t + 0.5 * h, 0.5 * h, f)
            err = norm(small - big) / 15.0
            ok = math.isfinite(err)
        except OperatorOverflowError:
            ok, err = False, math.inf
        if ok and err <= cfg.local_tol:
            factor = 5.0 if err == 0 else min(5.0, cfg.safety * (cfg.local_tol / err) ** 0.2)
            t_new = t_end if t_end - t <= h else t + h
            return small, t_new, min(h * max(factor, 0.2), cfg.max_step)
        factor = 0.2 if not ok else max(0.2, cfg.safety * (cfg.local_tol / err) ** 0.2)
        h *= factor
        if h < 1e-12 * max(1.0, t):
            raise StepSizeUnderflowError(f"adaptive step size underflow at t={t:.6g} (h={h:.3e})")
