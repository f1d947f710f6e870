"""Delayed-integral (Peano) approximations of ``w' = -F(w)``.

For delay ``1/n`` the approximation solves

    w_n(t) = w0 - int_0^t F(w_n(s - 1/n)) ds,    w_n(t) = w0 for t <= 0,

on a uniform grid. As ``n`` grows the runs form a Cauchy family whose limit
solves the integral form of the ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import GridError
from .hilbert import as_vec

INTEGRAL_RESIDUAL_FACTOR = 2.0
"""Slack ``C`` in the limit check ``||w(t) - w0 + int_0^t F(w)|| <= C * gap_tol``."""


@dataclass(frozen=True, eq=False)
class PeanoRun:
    n: int
    dt: float
    T: float
    w0: np.ndarray
    times: np.ndarray
    states: np.ndarray

    @property
    def delay(self) -> float:
        return 1.0 / self.n

    def state_at(self, t: float) -> np.ndarray:
        """State at the nearest grid point at or before ``t`` (``w0`` for ``t <= 0``)."""
        if t <= 0:
            return self.w0
        i = min(int(math.floor(t / self.dt + 1e-9)), len(self.times) - 1)
        return self.states[i]


@dataclass(frozen=True)
class GapReport:
    n: int
    m: int
    g_sup: float
    location: float
    times: Optional[np.ndarray] = None
    gaps: Optional[np.ndarray] = None


def peano_trajectory(F: Callable[[np.ndarray], np.ndarray], w0, n: int, T: float,
                     dt: float) -> PeanoRun:
    """March the delayed integral equation on a grid of step ``dt``.

    Each step adds ``-dt * F(w(t + dt - 1/n))``; the delayed state is read from
    the stored history at the nearest grid point not after the delayed time,
    or ``w0`` when that time is ``<= 0``. On ``[0, 1/n]`` the integrand is the
    constant ``F(w0)``, so that segment is reproduced exactly.
    """
    if n < 1:
        raise GridError("delay index n must be >= 1")
    if not T > 0:
        raise GridError("horizon T must be > 0")
    delay = 1.0 / n
    if not 0 < dt <= 0.5 * delay * (1 + 1e-12):
        raise GridError(f"grid step dt={dt} does not resolve the delay 1/n={delay} (need dt <= 1/(2n))")
    w0 = as_vec(w0)
    n_steps = int(math.ceil(T / dt - 1e-9))
    lag = delay / dt
    states = np.empty((n_steps + 1, w0.size))
    states[0] = w0
    for i in range(n_steps):
        # delayed time (i + 1 - lag) * dt, rounded down to the grid
        j = int(math.floor(i + 1 - lag + 1e-9))
        delayed = w0 if j <= 0 else states[j]
        states[i + 1] = states[i] - dt * np.asarray(F(delayed), dtype=float)
    times = np.arange(n_steps + 1) * dt
    w0.setflags(write=False)
    states.setflags(write=False)
    return PeanoRun(n=n, dt=float(dt), T=float(T), w0=w0, times=times, states=states)


def _shared_indices(a: PeanoRun, b: PeanoRun):
    """Indices of the grid times common to both runs (a common refinement sample)."""
    ia = np.arange(len(a.times))
    jb = np.rint(a.times / b.dt).astype(int)
    hit = (np.abs(jb * b.dt - a.times) <= 1e-9 * min(a.dt, b.dt)) & (jb < len(b.times))
    if np.count_nonzero(hit) < 2:
        raise GridError(f"grids dt={a.dt} and dt={b.dt} share no grid point after t=0")
    return ia[hit], jb[hit]


def peano_gap(run_n: PeanoRun, run_m: PeanoRun, keep_series: bool = False) -> GapReport:
    """Sup over the shared grid of ``||w_n(t) - w_m(t)||``."""
    if not np.array_equal(run_n.w0, run_m.w0):
        raise GridError("runs start from different initial states")
    if abs(run_n.T - run_m.T) > 1e-12 * max(1.0, run_n.T):
        raise GridError("runs have different horizons")
    ia, ib = _shared_indices(run_n, run_m)
    diff = run_n.states[ia] - run_m.states[ib]
    gaps = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    k = int(np.argmax(gaps))
    times = run_n.times[ia]
    return GapReport(
        n=run_n.n, m=run_m.n, g_sup=float(gaps[k]), location=float(times[k]),
        times=times if keep_series else None, gaps=gaps if keep_series else None,
    )


def integral_equation_residual(F: Callable, run: PeanoRun) -> float:
    """``max_t ||w(t) - w0 + int_0^t F(w(s)) ds||`` with trapezoid quadrature on the grid."""
    Fw = np.array([F(w) for w in run.states], dtype=float)
    dts = np.diff(run.times)[:, None]
    integral = np.vstack([np.zeros((1, Fw.shape[1])), np.cumsum(0.5 * dts * (Fw[1:] + Fw[:-1]), axis=0)])
    res = run.states - run.w0 + integral
    return float(np.sqrt(np.einsum("ij,ij->i", res, res)).max())


@dataclass(frozen=True, eq=False)
class PeanoLimit:
    run: PeanoRun
    achieved_gap: float
    converged: bool
    gaps: tuple
    integral_residual: float
    integral_residual_ok: bool


def default_dt(n: int, per_delay: int = 4) -> float:
    return 1.0 / (per_delay * n)


def peano_limit(F: Callable, w0, T: float, n_schedule: Sequence[int], gap_tol: float,
                per_delay: int = 4) -> PeanoLimit:
    """Refine the delay index along ``n_schedule`` until consecutive runs agree.

    Each run uses ``dt = 1/(per_delay * n)``. Stops at the first consecutive pair
    with ``g_sup <= gap_tol`` and returns the finer run. If the schedule is
    exhausted first, the last run is returned with ``converged=False``.
    """
    ns = list(n_schedule)
    if not ns:
        raise ValueError("n_schedule is empty")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_schedule must be strictly increasing")
    if not gap_tol > 0:
        raise ValueError("gap_tol must be > 0")
    if per_delay < 2:
        raise GridError("per_delay must be >= 2 so that dt <= 1/(2n)")

    prev = peano_trajectory(F, w0, ns[0], T, default_dt(ns[0], per_delay))
    gaps = []
    converged = False
    run = prev
    for n in ns[1:]:
        run = peano_trajectory(F, w0, n, T, default_dt(n, per_delay))
        g = peano_gap(prev, run).g_sup
        gaps.append((prev.n, n, g))
        if g <= gap_tol:
            converged = True
            break
        prev = run
    achieved = gaps[-1][2] if gaps else math.inf
    ir = integral_equation_residual(F, run)
    return PeanoLimit(
        run=run, achieved_gap=achieved, converged=converged, gaps=tuple(gaps),
        integral_residual=ir, integral_residual_ok=ir <= INTEGRAL_RESIDUAL_FACTOR * gap_tol,
    )
