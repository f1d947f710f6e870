import math

import numpy as np
import pytest

from monodsm.catalog import catalog, get_operator, solvable_catalog, describe_catalog
from monodsm.errors import (
    DimensionError,
    NoOracleError,
    NonFiniteInputError,
    OperatorOverflowError,
)
from monodsm.hilbert import (
    KnownSolution,
    OperatorInstance,
    OperatorSpec,
    apply,
    inner,
    minimal_norm_oracle,
    monotonicity_probe,
    norm,
)


def test_inner_examples():
    assert inner([1, 2], [3, 4]) == 11
    assert inner([1, 0], [0, 1]) == 0
    u = np.array([1.5, -2.0, 0.25])
    assert inner(u, u) == pytest.approx(norm(u) ** 2)


def test_inner_dimension_mismatch():
    with pytest.raises(DimensionError):
        inner([1, 2], [1, 2, 3])


def test_norm_examples():
    assert norm([3, 4]) == 5
    assert norm([0, 0]) == 0
    assert norm([-2]) == 2


def test_apply_examples():
    assert apply(get_operator("affine-1d"), [0.0]) == pytest.approx([-1.0])
    assert apply(get_operator("relu-1d"), [0.75]) == pytest.approx([0.0], abs=0)
    assert apply(get_operator("exp-1d"), [math.log(2)]) == pytest.approx([0.0], abs=1e-15)


def test_apply_dimension_mismatch(affine1d):
    with pytest.raises(DimensionError):
        apply(affine1d, [0.0, 1.0])


def test_apply_rejects_nan_input(affine1d):
    with pytest.raises(NonFiniteInputError):
        apply(affine1d, [float("nan")])


def test_exponential_overflow_is_structured():
    with pytest.raises(OperatorOverflowError):
        apply(get_operator("exp-1d"), [1000.0])


def test_apply_is_deterministic():
    op = get_operator("composite-2d")
    u = np.array([0.3, -1.7])
    a, b = apply(op, u), apply(op, u)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("fn, x, expected", [
    ("identity", -2.0, -2.0),
    ("relu", -2.0, 0.0),
    ("relu", 3.0, 3.0),
    ("lin_relu", -2.0, -2.0),
    ("lin_relu", 3.0, 6.0),
    ("cube", -2.0, -8.0),
    ("exp", 0.0, 1.0),
])
def test_componentwise_scalar_maps(fn, x, expected):
    op = OperatorInstance(OperatorSpec("componentwise", functions=[fn]), 1)
    assert apply(op, [x])[0] == expected


def test_mixed_componentwise_coordinates():
    op = OperatorInstance(OperatorSpec("componentwise", functions=["relu", "cube", "relu"]), 3)
    assert apply(op, [-1.0, 2.0, 4.0]).tolist() == [0.0, 8.0, 4.0]


def test_spec_rejects_non_psd_matrix():
    with pytest.raises(ValueError, match="positive semidefinite"):
        OperatorSpec("linear", matrix=[[-1.0]])


def test_spec_accepts_skew_matrix():
    OperatorSpec("linear", matrix=[[0.0, 1.0], [-1.0, 0.0]])


def test_spec_rejects_unknown_family_and_function():
    with pytest.raises(ValueError):
        OperatorSpec("quadratic")
    with pytest.raises(ValueError):
        OperatorSpec("componentwise", functions=["sin"])


def test_declared_solution_is_validated():
    spec = OperatorSpec("affine", matrix=[[1.0]], shift=[1.0])
    with pytest.raises(ValueError):
        OperatorInstance(spec, 1, KnownSolution(True, (2.0,), "wrong"))


# -- probe --------------------------------------------------------------------


def test_probe_identity_is_exactly_nonnegative():
    op = get_operator("identity-1d")
    rep = monotonicity_probe(op, 500, 10.0, seed=1)
    assert rep.min_value >= 0.0
    assert rep.passed


def test_probe_lin_relu_seed42():
    op = OperatorInstance(OperatorSpec("componentwise", functions=["lin_relu"]), 1)
    rep = monotonicity_probe(op, 1000, 10.0, seed=42)
    # direct evaluation over the same pairs, written independently
    rng = np.random.default_rng(42)
    U = rng.uniform(-10, 10, size=(1000, 1))[:, 0]
    V = rng.uniform(-10, 10, size=(1000, 1))[:, 0]
    phi = lambda s: s + max(s, 0.0)
    direct = min((phi(a) - phi(b)) * (a - b) for a, b in zip(U, V))
    assert direct >= 0
    assert rep.min_value == pytest.approx(direct, rel=1e-12)
    assert rep.passed


def test_probe_detects_nonmonotone(nonmonotone):
    rep = monotonicity_probe(nonmonotone, 50, 1.0, seed=0)
    assert rep.min_value < 0
    assert not rep.passed
    u, v = np.array(rep.worst_u), np.array(rep.worst_v)
    assert rep.min_value == pytest.approx(-norm(u - v) ** 2)


@pytest.mark.parametrize("name", list(catalog()))
def test_probe_passes_on_catalog(name):
    rep = monotonicity_probe(get_operator(name), 300, 5.0, seed=7)
    assert rep.passed, rep


def test_probe_argument_validation(affine1d):
    with pytest.raises(ValueError):
        monotonicity_probe(affine1d, 0, 1.0, 0)
    with pytest.raises(ValueError):
        monotonicity_probe(affine1d, 10, 0.0, 0)


# -- oracle ---------------------------------------------------------------------


def test_oracle_examples(affine1d, singular2d):
    assert minimal_norm_oracle(affine1d) == pytest.approx([1.0])
    assert minimal_norm_oracle(singular2d) == pytest.approx([1.0, 0.0], abs=1e-14)
    y = minimal_norm_oracle(get_operator("exp-1d"))
    assert y[0] == pytest.approx(0.693147180559945, abs=1e-12)


def test_oracle_certifies_no_solution():
    assert minimal_norm_oracle(get_operator("exp-unsolvable-1d")) is None
    relu_neg = OperatorInstance(OperatorSpec("componentwise", functions=["relu"], shift=[-1.0]), 1)
    assert minimal_norm_oracle(relu_neg) is None
    inconsistent = OperatorInstance(
        OperatorSpec("affine", matrix=[[1.0, 0.0], [0.0, 0.0]], shift=[1.0, 1.0]), 2)
    assert minimal_norm_oracle(inconsistent) is None


def test_oracle_unavailable_is_distinct_from_no_solution():
    with pytest.raises(NoOracleError):
        minimal_norm_oracle(get_operator("composite-2d"))


def test_oracle_flat_relu_picks_point_nearest_zero():
    # relu(u) = 0 on (-inf, 0]; u^3 = -8 at -2
    op = OperatorInstance(OperatorSpec("componentwise", functions=["relu", "cube"], shift=[0.0, -8.0]), 2)
    y = minimal_norm_oracle(op)
    assert y[0] == 0.0
    assert y[1] == pytest.approx(-2.0, abs=1e-11)


@pytest.mark.parametrize("name", list(solvable_catalog()))
def test_oracle_solution_has_small_residual_and_minimal_norm(name):
    op = get_operator(name)
    y = op.known_solution_set.y()
    assert norm(apply(op, y)) <= 1e-10


def test_minimal_norm_certificate_against_other_solutions(singular2d):
    y = minimal_norm_oracle(singular2d)
    for s in (-3.0, -0.1, 0.5, 2.0):
        z = np.array([1.0, s])
        assert norm(apply(singular2d, z)) == 0
        assert norm(y) <= norm(z)
    flat = get_operator("relu-flat-2d")
    y = flat.known_solution_set.y()
    for s in (-5.0, -0.2):
        z = np.array([s, 1.0])
        assert norm(apply(flat, z)) <= 1e-10
        assert norm(y) <= norm(z)


def test_catalog_description_schema():
    rows = describe_catalog()
    assert len(rows) >= 5
    assert all(r["oracle_tag"] for r in rows)
    fixtures = [r for r in rows if r["test_only"]]
    assert len(fixtures) == 1 and "NOT monotone" in fixtures[0]["description"]
    assert all(not op.test_only for op in catalog().values())


@pytest.mark.parametrize("scale", [1e-200, 1e-160, 1e160, 1e200])
def test_norm_survives_extreme_scales(scale):
    assert norm([3 * scale, 4 * scale]) == pytest.approx(5 * scale, rel=1e-15)
