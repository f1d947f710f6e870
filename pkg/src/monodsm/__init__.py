"""Dynamical systems method for monotone operator equations.

Solves ``B(u) + eps u = 0`` and ``B(u) = 0`` for monotone, possibly
non-smooth ``B`` on R^n by integrating the regularized flow
``u' = -B(u) - eps(t) u``, and checks the flow's decay and limit estimates.
"""

__version__ = "0.1.0"

from .catalog import catalog, get_operator, solvable_catalog
from .diagnostics import (
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
)
from .hilbert import (
    KnownSolution,
    OperatorInstance,
    OperatorSpec,
    apply,
    inner,
    minimal_norm_oracle,
    monotonicity_probe,
    norm,
)
from .integrator import (
    CauchyProblem,
    IntegratorConfig,
    SolveReport,
    StopCriteria,
    Trajectory,
    residual,
    rhs,
    solve_cauchy,
    step_euler,
    step_rk4,
)
from .peano import GapReport, PeanoRun, peano_gap, peano_limit, peano_trajectory
from .schedule import EpsilonSchedule
