"""Finite-dimensional real Hilbert space and monotone operators on it.

H is modelled as R^n with the Euclidean inner product. Operators are built
from a declarative :class:`OperatorSpec`; monotonicity is guaranteed by
construction (positive semidefinite symmetric part, nondecreasing scalar
maps) and spot-checked with :func:`monotonicity_probe`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionError,
    NoOracleError,
    NonFiniteInputError,
    OperatorOverflowError,
)

FAMILIES = ("linear", "affine", "componentwise", "exponential", "custom-composite")

ORACLE_TOL = 1e-10
BISECTION_TOL = 1e-12
PSD_TOL = 1e-12


def as_vec(u, dimension: Optional[int] = None) -> np.ndarray:
    """Coerce ``u`` to a finite 1-D float array, optionally checking its size."""
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"expected a nonempty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError("vector has non-finite components")
    if dimension is not None and arr.size != dimension:
        raise DimensionError(f"expected dimension {dimension}, got {arr.size}")
    return arr


def inner(u, v) -> float:
    """Euclidean inner product ``sum(u_i * v_i)``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if u.shape != v.shape:
        raise DimensionError(f"inner: shapes {u.shape} and {v.shape} differ")
    return float(np.dot(u, v))


def norm(u) -> float:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    sq = float(np.dot(u, u))
    if 1e-290 < sq < 1e290:
        return math.sqrt(sq)
    # squares under- or overflow: rescale by the largest entry first
    m = float(np.max(np.abs(u))) if u.size else 0.0
    if m == 0.0 or not math.isfinite(m):
        return m
    w = u / m
    return m * math.sqrt(float(np.dot(w, w)))


# -- scalar maps for the componentwise family --------------------------------


@dataclass(frozen=True)
class ScalarMap:
    """A continuous nondecreasing map R -> R together with its range.

    The range ``(lower, upper)`` with attainment flags lets the bisection
    oracle certify unsolvable coordinates instead of searching forever.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    scalar: Callable[[float], float]
    lower: float
    upper: float
    lower_attained: bool
    upper_attained: bool
    note: str

    def in_range(self, value: float) -> bool:
        if value < self.lower or value > self.upper:
            return False
        if value == self.lower and not self.lower_attained:
            return False
        if value == self.upper and not self.upper_attained:
            return False
        return True


def _safe_exp(s: float) -> float:
    try:
        return math.exp(s)
    except OverflowError:
        return math.inf


SCALAR_MAPS = {
    "identity": ScalarMap(
        "identity", lambda x: x, lambda s: s,
        -math.inf, math.inf, False, False, "u -> u",
    ),
    "relu": ScalarMap(
        "relu", lambda x: np.maximum(x, 0.0), lambda s: max(s, 0.0),
        0.0, math.inf, True, False, "u -> max(u, 0); flat for u <= 0",
    ),
    "lin_relu": ScalarMap(
        "lin_relu", lambda x: x + np.maximum(x, 0.0), lambda s: s + max(s, 0.0),
        -math.inf, math.inf, False, False, "u -> u + max(u, 0); kink at 0",
    ),
    "exp": ScalarMap(
        "exp", np.exp, _safe_exp,
        0.0, math.inf, False, False, "u -> e^u; range (0, inf)",
    ),
    "cube": ScalarMap(
        "cube", lambda x: x * x * x, lambda s: s * s * s,
        -math.inf, math.inf, False, False, "u -> u^3",
    ),
}


# -- operator specification ---------------------------------------------------


def _tuple_or_none(x, depth=1):
    if x is None:
        return None
    if depth == 2:
        return tuple(tuple(float(a) for a in row) for row in x)
    return tuple(float(a) for a in x)


@dataclass(frozen=True)
class OperatorSpec:
    """Declarative description of a monotone map.

    =================  ===================================  ==================
    family             B(u)                                 parameters
    =================  ===================================  ==================
    linear             A u                                  matrix
    affine             A u - f                              matrix, shift
    componentwise      phi_i(u_i) - f_i                     functions, shift
    exponential        exp(u_i) - f_i                       shift
    custom-composite   A u + phi_i(u_i) - f_i               matrix, functions,
                                                            shift
    =================  ===================================  ==================

    ``shift`` defaults to zero. ``enforce_monotone=False`` disables the
    construction-time monotonicity checks and exists only so the test suite
    can build a deliberately non-monotone fixture.
    """

    family: str
    matrix: Optional[tuple] = None
    functions: Optional[tuple] = None
    shift: Optional[tuple] = None
    enforce_monotone: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown operator family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "matrix", _tuple_or_none(self.matrix, depth=2))
        object.__setattr__(self, "shift", _tuple_or_none(self.shift))
        if self.functions is not None:
            fns = (self.functions,) if isinstance(self.functions, str) else tuple(self.functions)
            object.__setattr__(self, "functions", fns)

        needs_matrix = self.family in ("linear", "affine", "custom-composite")
        needs_functions = self.family in ("componentwise", "custom-composite")
        if needs_matrix and self.matrix is None:
            raise ValueError(f"family {self.family!r} requires a matrix")
        if not needs_matrix and self.matrix is not None:
            raise ValueError(f"family {self.family!r} takes no matrix")
        if needs_functions and self.functions is None:
            raise ValueError(f"family {self.family!r} requires functions")
        if not needs_functions and self.functions is not None:
            raise ValueError(f"family {self.family!r} takes no functions")
        if self.family == "linear" and self.shift is not None and any(self.shift):
            raise ValueError("linear family takes no shift; use 'affine'")

        if self.matrix is not None:
            A = np.array(self.matrix, dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1] or A.size == 0:
                raise DimensionError(f"matrix must be square, got shape {A.shape}")
            if not np.all(np.isfinite(A)):
                raise NonFiniteInputError("matrix has non-finite entries")
            if self.enforce_monotone:
                lam = np.linalg.eigvalsh(0.5 * (A + A.T)).min()
                if lam < -PSD_TOL * max(1.0, np.abs(A).max()):
                    raise ValueError(
                        f"symmetric part of matrix is not positive semidefinite "
                        f"(smallest eigenvalue {lam:.3e})"
                    )
        if self.functions is not None:
            for name in self.functions:
                if name not in SCALAR_MAPS:
                    raise ValueError(f"unknown scalar map {name!r}; catalog: {sorted(SCALAR_MAPS)}")
        if self.shift is not None and not all(math.isfinite(s) for s in self.shift):
            raise NonFiniteInputError("shift has non-finite entries")

    def inferred_dimension(self) -> Optional[int]:
        if self.matrix is not None:
            return len(self.matrix)
        if self.shift is not None:
            return len(self.shift)
        if self.functions is not None and len(self.functions) > 1:
            return len(self.functions)
        return None

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.matrix is not None:
            out["matrix"] = [list(r) for r in self.matrix]
        if self.functions is not None:
            out["functions"] = list(self.functions)
        if self.shift is not None:
            out["shift"] = list(self.shift)
        return out


@dataclass(frozen=True)
class KnownSolution:
    """Solution-set metadata: does ``B(u) = 0`` have a solution, and its minimal-norm element."""

    has_solution: bool
    minimal_norm_y: Optional[tuple] = None
    oracle_tag: str = ""

    def y(self) -> Optional[np.ndarray]:
        if self.minimal_norm_y is None:
            return None
        return np.array(self.minimal_norm_y, dtype=float)


@dataclass(frozen=True, eq=False)
class OperatorInstance:
    """A monotone map B: R^n -> R^n.

    Use :func:`apply` (or call the instance) to evaluate.
    """

    spec: OperatorSpec
    dimension: int
    known_solution_set: Optional[KnownSolution] = None
    name: str = ""
    description: str = ""
    test_only: bool = False
    _fn: Callable = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise DimensionError("dimension must be >= 1")
        object.__setattr__(self, "dimension", int(self.dimension))
        inferred = self.spec.inferred_dimension()
        if inferred is not None and inferred != self.dimension:
            raise DimensionError(
                f"spec implies dimension {inferred}, instance declares {self.dimension}"
            )
        if self.spec.shift is not None and len(self.spec.shift) != self.dimension:
            raise DimensionError("shift length does not match dimension")
        if self.spec.functions is not None and len(self.spec.functions) not in (1, self.dimension):
            raise DimensionError("functions must have length 1 or the operator dimension")
        object.__setattr__(self, "_fn", _build_evaluator(self.spec, self.dimension))
        ks = self.known_solution_set
        if ks is not None and ks.has_solution and ks.minimal_norm_y is not None:
            y = ks.y()
            if y.size != self.dimension:
                raise DimensionError("known minimal-norm solution has wrong dimension")
            r = norm(self._fn(y))
            if r > ORACLE_TOL:
                raise ValueError(f"declared minimal-norm solution has ||B(y)|| = {r:.3e}")

    def __call__(self, u) -> np.ndarray:
        return apply(self, u)

    def evaluate_unchecked(self, u: np.ndarray) -> np.ndarray:
        """Evaluate on an already validated float array; still guards overflow."""
        out = self._fn(u)
        if not np.all(np.isfinite(out)):
            raise OperatorOverflowError(f"operator {self.name or self.spec.family} overflowed")
        return out

    def functions_per_coordinate(self) -> tuple:
        fns = self.spec.functions
        if self.spec.family == "exponential":
            return ("exp",) * self.dimension
        if fns is None:
            return ()
        return fns * self.dimension if len(fns) == 1 else fns

    def shift_vector(self) -> np.ndarray:
        if self.spec.shift is None:
            return np.zeros(self.dimension)
        return np.array(self.spec.shift, dtype=float)


def _componentwise_evaluator(fns: Sequence[str], n: int) -> Callable:
    names = tuple(fns) * n if len(fns) == 1 else tuple(fns)
    if len(set(names)) == 1:
        return SCALAR_MAPS[names[0]].func
    groups = []
    for name in sorted(set(names)):
        idx = np.array([i for i, nm in enumerate(names) if nm == name])
        groups.append((idx, SCALAR_MAPS[name].func))

    def evaluate(u):
        out = np.empty_like(u)
        for idx, fn in groups:
            out[idx] = fn(u[idx])
        return out

    return evaluate


def _build_evaluator(spec: OperatorSpec, n: int) -> Callable:
    f = np.zeros(n) if spec.shift is None else np.array(spec.shift, dtype=float)
    A = None if spec.matrix is None else np.array(spec.matrix, dtype=float)

    if spec.family == "linear":
        return lambda u: A @ u
    if spec.family == "affine":
        return lambda u: A @ u - f
    if spec.family == "exponential":

        def exponential(u):
            with np.errstate(over="ignore"):
                return np.exp(u) - f

        return exponential

    phi = _componentwise_evaluator(spec.functions, n)
    if spec.family == "componentwise":

        def componentwise(u):
            with np.errstate(over="ignore", invalid="ignore"):
                return phi(u) - f

        return componentwise

    def composite(u):
        with np.errstate(over="ignore", invalid="ignore"):
            return A @ u + phi(u) - f

    return composite


def apply(op: OperatorInstance, u) -> np.ndarray:
    """Evaluate ``B(u)``.

    Raises
    ------
    DimensionError
        If ``u`` does not match ``op.dimension``.
    OperatorOverflowError
        If the result is not finite (e.g. ``exp`` at extreme inputs).
    """
    u = as_vec(u, op.dimension)
    return op.evaluate_unchecked(u)


# -- monotonicity probe -------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    """Smallest observed ``(B(u) - B(v), u - v)`` over sampled pairs.

    ``worst_u``/``worst_v`` is the pair attaining ``min_value``.
    ``min_normalized`` is the smallest value of the pairing divided by
    ``||u - v||^2``; the probe passes when it is at least ``-tol``.
    """

    sample_count: int
    box_radius: float
    seed: int
    min_value: float
    min_normalized: float
    worst_u: tuple
    worst_v: tuple
    tol: float

    @property
    def passed(self) -> bool:
        return self.min_normalized >= -self.tol

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "box_radius": self.box_radius,
            "seed": self.seed,
            "min_value": self.min_value,
            "min_normalized": self.min_normalized,
            "worst_u": list(self.worst_u),
            "worst_v": list(self.worst_v),
            "tol": self.tol,
            "passed": self.passed,
        }


def monotonicity_probe(op: OperatorInstance, sample_count: int, box_radius: float,
                       seed: int, tol: float = 1e-12) -> ProbeReport:
    """Sample pairs uniformly in ``[-box_radius, box_radius]^n`` and report the
    smallest monotonicity pairing found."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if not box_radius > 0:
        raise ValueError("box_radius must be > 0")
    rng = np.random.default_rng(seed)
    U = rng.uniform(-box_radius, box_radius, size=(sample_count, op.dimension))
    V = rng.uniform(-box_radius, box_radius, size=(sample_count, op.dimension))
    min_val, min_norm, worst = math.inf, math.inf, 0
    for k in range(sample_count):
        d = U[k] - V[k]
        val = inner(op.evaluate_unchecked(U[k]) - op.evaluate_unchecked(V[k]), d)
        dd = inner(d, d)
        if val < min_val:
            min_val, worst = val, k
        min_norm = min(min_norm, val / dd if dd > 0 else 0.0)
    k = worst
    return ProbeReport(
        sample_count=sample_count, box_radius=float(box_radius), seed=seed,
        min_value=float(min_val), min_normalized=float(min_norm),
        worst_u=tuple(U[k]), worst_v=tuple(V[k]), tol=tol,
    )


# -- minimal-norm oracles -----------------------------------------------------


def _bisect_min_norm_root(smap: ScalarMap, target: float, tol: float = BISECTION_TOL):
    """Smallest-magnitude s with ``smap(s) == target``, or None if none exists.

    The solution set of a continuous nondecreasing scalar equation is a closed
    interval, so its minimal-magnitude point is found by bracketing from 0.
    """
    if not smap.in_range(target):
        return None
    g0 = smap.scalar(0.0) - target
    if g0 == 0.0:
        return 0.0
    sign = 1.0 if g0 < 0 else -1.0
    # sign=+1: leftmost s>0 with g(s) >= 0; sign=-1: rightmost s<0 with g(s) <= 0
    near, far = 0.0, sign
    for _ in range(2100):
        gf = smap.scalar(far) - target
        if sign * gf >= 0:
            break
        near, far = far, 2.0 * far
    else:
        return None
    while abs(far - near) > tol * max(1.0, abs(near)):
        mid = 0.5 * (near + far)
        if mid in (near, far):
            break
        if sign * (smap.scalar(mid) - target) >= 0:
            far = mid
        else:
            near = mid
    return far


def minimal_norm_oracle(op: OperatorInstance) -> Optional[np.ndarray]:
    """Independent minimal-norm solution of ``B(u) = 0``.

    Linear and affine operators use an SVD least-squares solve (which returns
    the minimum-norm solution when the system is consistent). Componentwise
    and exponential operators bisect each nondecreasing coordinate map.

    Returns
    -------
    ndarray or None
        ``y`` with ``||B(y)|| <= 1e-10``, or None when the oracle certifies
        that no solution exists.

    Raises
    ------
    NoOracleError
        For families without an independent oracle (``custom-composite``).
    """
    fam = op.spec.family
    if fam in ("linear", "affine"):
        A = np.array(op.spec.matrix, dtype=float)
        f = op.shift_vector()
        y, *_ = np.linalg.lstsq(A, f, rcond=None)
        if norm(A @ y - f) > ORACLE_TOL:
            return None
        return y
    if fam in ("componentwise", "exponential"):
        f = op.shift_vector()
        y = np.empty(op.dimension)
        for i, name in enumerate(op.functions_per_coordinate()):
            root = _bisect_min_norm_root(SCALAR_MAPS[name], float(f[i]))
            if root is None:
                return None
            y[i] = root
        if norm(op.evaluate_unchecked(y)) > ORACLE_TOL:
            return None
        return y
    raise NoOracleError(f"no independent oracle for family {fam!r}")
