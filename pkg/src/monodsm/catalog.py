"""Named operator instances used by the tests, the acceptance suite and the CLI."""

from __future__ import annotations

from .hilbert import KnownSolution, OperatorInstance, OperatorSpec, minimal_norm_oracle


def _with_oracle(name, spec, dimension, description):
    op = OperatorInstance(spec, dimension, name=name, description=description)
    y = minimal_norm_oracle(op)
    tag = "lstsq-min-norm" if spec.family in ("linear", "affine") else "bisection"
    known = KnownSolution(
        has_solution=y is not None,
        minimal_norm_y=None if y is None else tuple(float(v) for v in y),
        oracle_tag=tag,
    )
    return OperatorInstance(spec, dimension, known, name=name, description=description)


def _build():
    ops = [
        _with_oracle(
            "affine-1d", OperatorSpec("affine", matrix=[[1.0]], shift=[1.0]), 1,
            "B(u) = u - 1; unique root y = 1",
        ),
        _with_oracle(
            "identity-1d", OperatorSpec("linear", matrix=[[1.0]]), 1,
            "B(u) = u; y = 0",
        ),
        _with_oracle(
            "singular-2d",
            OperatorSpec("affine", matrix=[[1.0, 0.0], [0.0, 0.0]], shift=[1.0, 0.0]), 2,
            "B(u) = diag(1,0) u - (1,0); solutions {(1,s)}, minimal norm (1,0)",
        ),
        _with_oracle(
            "skew-affine-2d",
            OperatorSpec("affine", matrix=[[1.0, 1.0], [-1.0, 0.0]], shift=[1.0, 1.0]), 2,
            "B(u) = A u - f with singular PSD symmetric part and a skew part; y = (-1, 2)",
        ),
        _with_oracle(
            "relu-1d", OperatorSpec("componentwise", functions=["lin_relu"], shift=[1.5]), 1,
            "B(u) = u + relu(u) - 1.5; kink at 0, y = 0.75",
        ),
        _with_oracle(
            "relu-flat-2d",
            OperatorSpec("componentwise", functions=["relu", "cube"], shift=[0.0, 1.0]), 2,
            "B(u) = (relu(u1), u2^3 - 1); solutions (-inf,0] x {1}, y = (0, 1)",
        ),
        _with_oracle(
            "exp-1d", OperatorSpec("exponential", shift=[2.0]), 1,
            "B(u) = e^u - 2; y = ln 2",
        ),
        OperatorInstance(
            OperatorSpec(
                "custom-composite", matrix=[[1.0, -1.0], [1.0, 1.0]],
                functions=["relu"], shift=[1.5, 2.0],
            ),
            2,
            KnownSolution(True, (1.0, 0.5), "constructed: f = A y + relu(y)"),
            name="composite-2d",
            description="B(u) = A u + relu(u) - f, A = I + skew; strongly monotone, y = (1, 0.5)",
        ),
        _with_oracle(
            "exp-unsolvable-1d", OperatorSpec("exponential"), 1,
            "B(u) = e^u; B(u) = 0 has no solution (regularized problems do)",
        ),
        OperatorInstance(
            OperatorSpec("linear", matrix=[[-2.0]], enforce_monotone=False), 1,
            KnownSolution(True, (0.0,), "analytic"),
            name="nonmonotone-fixture-1d",
            description="B(u) = -2u; NOT monotone, exists to prove the checks detect violations",
            test_only=True,
        ),
    ]
    return {op.name: op for op in ops}


_CATALOG = _build()

DEFAULT_SCHEDULE_NOTE = "power-law defaults c0=1, c1=1, b=0.5 are an artifact choice"


def catalog(include_test_only: bool = False) -> dict:
    """Catalog entries by name, in a fixed order."""
    return {k: v for k, v in _CATALOG.items() if include_test_only or not v.test_only}


def solvable_catalog() -> dict:
    """Monotone entries whose equation ``B(u) = 0`` has a known minimal-norm solution."""
    return {
        k: v for k, v in catalog().items()
        if v.known_solution_set is not None and v.known_solution_set.has_solution
    }


def get_operator(name: str) -> OperatorInstance:
    try:
        return _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog operator {name!r}; available: {list(_CATALOG)}") from None


def describe_catalog() -> list:
    """Rows describing every entry, including test-only fixtures."""
    from .hilbert import SCALAR_MAPS

    rows = []
    for op in _CATALOG.values():
        spec = op.spec
        if spec.matrix is not None and spec.enforce_monotone:
            rationale = "symmetric part of the matrix is positive semidefinite"
        elif not spec.enforce_monotone:
            rationale = "none: deliberately non-monotone"
        else:
            rationale = ""
        fns = op.functions_per_coordinate()
        if fns:
            scal = "nondecreasing scalar maps: " + ", ".join(
                f"{n} ({SCALAR_MAPS[n].note})" for n in dict.fromkeys(fns)
            )
            rationale = f"{rationale}; {scal}" if rationale else scal
        ks = op.known_solution_set
        rows.append({
            "name": op.name,
            "family": spec.family,
            "dimension": op.dimension,
            "parameters": spec.to_dict(),
            "description": op.description,
            "monotonicity": rationale,
            "has_solution": None if ks is None else ks.has_solution,
            "minimal_norm_y": None if ks is None or ks.minimal_norm_y is None else list(ks.minimal_norm_y),
            "oracle_tag": "none" if ks is None else ks.oracle_tag,
            "test_only": op.test_only,
        })
    return rows

