import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np
import pytest

from monodsm.catalog import catalog
from monodsm.cli import main
from monodsm.errors import ConfigError
from monodsm.harness import config as cfgmod
from monodsm.harness import runner
from monodsm.hilbert import OperatorInstance, OperatorSpec
from monodsm.integrator import CauchyProblem, residual
from monodsm.schedule import EpsilonSchedule

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = """\
run_id = "t"
output_dir = "{out}"

[operator]
catalog = "affine-1d"

[schedule]
kind = "constant"
eps = 0.1

[integrator]
dt = 0.01
t_max = 50.0
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text.format(out=(tmp_path / "runs").as_posix()))
    return p


def parse(text, tmp_path=Path("."), **kw):
    return cfgmod.parse_config(text.format(out=(tmp_path / "runs").as_posix()), **kw)


# -- configuration ------------------------------------------------------------------


def test_parse_defaults():
    c = parse(BASE)
    assert c.run_id == "t"
    assert c.schedule.is_constant and c.schedule.eps_value == 0.1
    np.testing.assert_array_equal(c.initial, [0.0])
    assert c.integrator.method == "rk4"
    assert c.stop.residual_tol == 1e-8
    assert [s.name for s in c.checks] == ["shift_decay", "derivative_decay", "norm_bound"]
    assert c.checks[0].params["h"] == (0.1, 0.5, 1.0)


def test_power_law_default_checks():
    c = parse(BASE.replace('kind = "constant"\neps = 0.1', 'kind = "power-law"'))
    assert c.schedule.uses_default_parameters()
    assert [s.name for s in c.checks] == ["boundedness", "residual_vanishes"]


def test_explicit_operator():
    text = BASE.replace('catalog = "affine-1d"', 'family = "affine"\nmatrix = [[2.0]]\nshift = [4.0]')
    c = parse(text)
    assert c.operator.dimension == 1
    assert runner.resolve_minimal_norm(c.operator)[0] == pytest.approx([2.0])


@pytest.mark.parametrize("preset,expected", [
    ('preset = "ones"', [1.0, 1.0]),
    ('preset = "vector"\nvalues = [0.0, 1.0]', [0.0, 1.0]),
])
def test_initial_presets(preset, expected):
    text = BASE.replace("affine-1d", "singular-2d") + f"\n[initial]\n{preset}\n"
    np.testing.assert_array_equal(parse(text).initial, expected)


def test_random_preset_is_seeded():
    text = BASE + '\n[initial]\npreset = "random"\nseed = 7\nscale = 2.0\n'
    a, b = parse(text).initial, parse(text).initial
    np.testing.assert_array_equal(a, b)
    assert a == pytest.approx(np.random.default_rng(7).uniform(-2.0, 2.0, size=1))


@pytest.mark.parametrize("text,field,line", [
    (BASE + "\n[stop]\nresidual_tol = 1e-8\nresidula = 3\n", "stop.residula", 17),
    (BASE.replace("t_max = 50.0", "t_max = 50.0\ntmax = 3.0"), "integrator.tmax", 14),
    (BASE.replace('run_id = "t"', 'run_id = "t"\nextra = 1'), "extra", 2),
    (BASE + '\n[[checks]]\nname = "shift_decay"\noffset = 2.0\n', "checks[0].offset", 17),
    (BASE + '\n[[checks]]\nname = "derivative_decay"\n\n[[checks]]\nname = "shift_decy"\n',
     "checks[1].name", 19),
    (BASE + '\n[sweep]\neps = "x"\n', "sweep.eps", 16),
])
def test_unknown_keys_report_field_and_line(text, field, line):
    with pytest.raises(ConfigError) as info:
        parse(text)
    assert info.value.field == field
    assert info.value.line == line
    assert f"line {line}" in str(info.value) and field in str(info.value)


@pytest.mark.parametrize("text,field", [
    (BASE.replace('run_id = "t"', 'run_id = "a/b"'), "run_id"),
    (BASE.replace('run_id = "t"', 'run_id = ""'), "run_id"),
    (BASE.replace("dt = 0.01", 'dt = "small"'), "integrator.dt"),
    (BASE.replace('catalog = "affine-1d"', 'catalog = "affine-1d"\nfamily = "linear"'), "operator.catalog"),
    (BASE.replace('catalog = "affine-1d"', 'catalog = "nope"'), "operator.catalog"),
    (BASE.replace("eps = 0.1", "eps = 0.1\nb = 0.5"), "schedule"),
    (BASE + '\n[initial]\npreset = "sideways"\n', "initial.preset"),
    (BASE + '\n[initial]\npreset = "vector"\nvalues = [1.0, 2.0]\n', "initial.values"),
    (BASE + "\n[stop]\ndivergence_bound = 0.5\n[initial]\npreset = \"ones\"\n", "stop.divergence_bound"),
    (BASE.replace('catalog = "affine-1d"', 'family = "linear"\nmatrix = [[-1.0]]'), "operator.family"),
])
def test_invalid_values(text, field):
    with pytest.raises(ConfigError) as info:
        parse(text)
    assert info.value.field == field


def test_missing_operator():
    with pytest.raises(ConfigError) as info:
        cfgmod.parse_config('run_id = "x"\n')
    assert info.value.field == "operator"


def test_toml_syntax_error_has_line():
    with pytest.raises(ConfigError) as info:
        cfgmod.parse_config('run_id = "x"\n[operator\n')
    assert info.value.line == 2


def test_overrides_apply():
    c = parse(BASE, overrides={"integrator.dt": 0.02, "stop.residual_tol": 1e-6, "output_dir": None})
    assert c.integrator.dt == 0.02
    assert c.stop.residual_tol == 1e-6


def test_config_hash_tracks_content():
    a, b = parse(BASE), parse(BASE.replace("eps = 0.1", "eps = 0.2"))
    assert a.config_hash() != b.config_hash()
    assert a.config_hash() == parse(BASE).config_hash()


# -- run ----------------------------------------------------------------------------


def test_run_affine(tmp_path, capsys):
    assert main(["run", str(write(tmp_path, BASE))]) == 0
    d = tmp_path / "runs" / "t"
    for f in ("trajectory.csv", "summary.json", "diagnostics.json", "config.toml"):
        assert (d / f).exists()
    s = json.loads((d / "summary.json").read_text())
    assert s["limit"][0] == pytest.approx(1 / 1.1, abs=1e-6)
    assert s["config_echo"] == "config.toml"
    assert s["config_sha256"] == cfgmod.load_config(d / "config.toml").config_hash()
    assert s["tolerances"]["residual_tol"] == 1e-8
    assert "converged" in capsys.readouterr().out


def test_run_singular_power_law(tmp_path):
    text = BASE.replace("affine-1d", "singular-2d").replace('kind = "constant"\neps = 0.1', "")
    text += '\n[initial]\npreset = "vector"\nvalues = [0.0, 1.0]\n'
    art = runner.run(parse(text, tmp_path, overrides={"integrator.method": "rk4-adaptive",
                                                      "integrator.t_max": 1e3}))
    assert art.summary["limit"] == pytest.approx([1.0, 0.0], abs=0.05)
    assert "schedule_note" in art.summary
    assert art.exit_code == 0


def test_exit_code_matches_overall(tmp_path):
    ok = runner.run(parse(BASE, tmp_path))
    assert ok.overall and ok.exit_code == 0
    text = BASE + '\n[[checks]]\nname = "norm_bound"\n'
    art = runner.run(parse(text.replace("t_max = 50.0", "t_max = 1.0"), tmp_path))
    diag = json.loads(art.diagnostics_json.read_text())
    assert diag["overall"] is False
    assert art.exit_code == 1


def test_trajectory_csv_rows_satisfy_invariant(tmp_path):
    text = BASE.replace("affine-1d", "composite-2d").replace('kind = "constant"\neps = 0.1', "")
    art = runner.run(parse(text, tmp_path, overrides={"integrator.t_max": 20.0}))
    with open(art.trajectory_csv) as fh:
        header = next(csv.reader(fh))
    assert header == ["t", "state_0", "state_1", "residual", "eps"]
    traj = runner.read_trajectory_csv(art.trajectory_csv)
    cfg = parse(text, tmp_path)
    p = CauchyProblem(cfg.operator, cfg.schedule, cfg.initial)
    for t, u, r, e in zip(traj.times, traj.states, traj.residuals, traj.eps):
        assert abs(residual(p, t, u) - r) <= 1e-12
        assert e == cfg.schedule.eps(t)


def test_round_trip_is_bit_identical(tmp_path):
    first = runner.run(parse(BASE, tmp_path))
    echoed = cfgmod.load_config(first.config_echo, {"output_dir": str(tmp_path / "again")})
    second = runner.run(echoed)
    assert first.trajectory_csv.read_bytes() == second.trajectory_csv.read_bytes()


def test_cli_overrides(tmp_path):
    cfg = write(tmp_path, BASE)
    out = tmp_path / "elsewhere"
    assert main(["run", str(cfg), "--out", str(out), "--dt", "0.02", "--t-max", "20", "--tol", "1e-4"]) == 0
    s = json.loads((out / "t" / "summary.json").read_text())
    assert s["integrator"]["dt"] == 0.02
    assert s["integrator"]["t_max"] == 20.0
    assert s["tolerances"]["residual_tol"] == 1e-4


def test_exp_unsolvable_never_converges(tmp_path):
    text = BASE.replace("affine-1d", "exp-unsolvable-1d").replace('kind = "constant"\neps = 0.1', "")
    cfg = write(tmp_path, text + "\n[stop]\nresidual_tol = 1e-8\n")
    code = main(["run", str(cfg), "--t-max", "200"])
    s = json.loads((tmp_path / "runs" / "t" / "summary.json").read_text())
    assert code != 0
    assert s["status"] != "converged"
    assert s["minimal_norm_y"] is None


def test_exp_unsolvable_tight_bound_diverges(tmp_path):
    text = BASE.replace("affine-1d", "exp-unsolvable-1d").replace('kind = "constant"\neps = 0.1', "")
    art = runner.run(parse(text + "\n[stop]\ndivergence_bound = 3.0\n", tmp_path,
                           overrides={"integrator.t_max": 1e4, "integrator.method": "rk4-adaptive"}))
    assert art.summary["status"] == "diverged"
    assert art.exit_code == 1


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["run", str(write(tmp_path, BASE + "\nbogus = 1\n"))]) == 2
    assert "bogus" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml")]) == 2


# -- sweep-eps ---------------------------------------------------------------------


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sweep_affine(tmp_path):
    cfg = write(tmp_path, BASE + "\n[stop]\nresidual_tol = 1e-11\n", "s.toml")
    code = main(["sweep-eps", str(cfg), "--eps", "0.1,0.01,0.001", "--t-max", "1e5"])
    rows = read_rows(tmp_path / "runs" / "t.sweep-eps" / "regpath.csv")
    assert code == 0
    for row in rows:
        e = float(row["eps"])
        assert float(row["error_to_y"]) == pytest.approx(e / (1 + e), rel=1e-4)
        assert row["status"] == "converged"


def test_sweep_identity_zero_errors(tmp_path):
    text = BASE.replace("affine-1d", "identity-1d") + '\n[initial]\npreset = "ones"\n'
    art = runner.sweep_eps(parse(text, tmp_path), [0.5, 0.1, 0.05])
    errs = [r["error_to_y"] for r in art.summary["table"]]
    assert all(e <= 1e-8 for e in errs)
    assert art.overall


def test_sweep_unconverged_rows_flagged(tmp_path):
    art = runner.sweep_eps(parse(BASE, tmp_path, overrides={"integrator.t_max": 1.0}), [0.1, 0.01, 0.001])
    rows = read_rows(art.run_dir / "regpath.csv")
    assert len(rows) == 3
    assert all(r["status"] == "horizon-reached" for r in rows)
    diag = json.loads(art.diagnostics_json.read_text())
    assert diag["records"][-1]["status"] == "inconclusive"
    assert art.exit_code == 1


@pytest.mark.parametrize("eps", [[0.01, 0.1], [0.1, -0.1], []])
def test_sweep_rejects_bad_lists(tmp_path, eps):
    with pytest.raises(ValueError):
        runner.sweep_eps(parse(BASE, tmp_path), eps)


def test_sweep_requires_constant_schedule(tmp_path):
    with pytest.raises(ValueError):
        runner.sweep_eps(parse(BASE.replace('kind = "constant"\neps = 0.1', ""), tmp_path), [0.1])


# -- peano-compare ---------------------------------------------------------------


def test_peano_linear_discrepancy_decreases(tmp_path):
    cfg = CONFIGS / "linear-peano.toml"
    assert main(["peano-compare", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "linear-peano.peano-compare" / "peano.csv")
    disc = [float(r["sup_discrepancy"]) for r in rows]
    assert disc == sorted(disc, reverse=True)
    for r in rows:
        assert float(r["sup_discrepancy"]) <= 3 * (1 / int(r["n"]) + float(r["dt"]))


def test_peano_constant_field_fixture(tmp_path):
    # B(w) = 0.7 - 0.1 w, so F = B + 0.1 w is the constant 0.7
    op = OperatorInstance(OperatorSpec("affine", matrix=[[-0.1]], shift=[-0.7], enforce_monotone=False), 1,
                          test_only=True)
    config = dataclasses.replace(parse(BASE, tmp_path), operator=op)
    art = runner.peano_compare(config, [10, 20, 40])
    rows = art.summary["table"]
    assert rows[0]["sup_discrepancy"] == pytest.approx(0.0, abs=1e-12)
    assert art.summary["limit_n"] == 20
    assert art.overall


def test_peano_relu_agreement(tmp_path):
    art = runner.peano_compare(cfgmod.load_config(CONFIGS / "relu-peano.toml", {"output_dir": str(tmp_path)}))
    assert art.summary["final_agreement"] <= 1e-2
    assert art.overall


@pytest.mark.parametrize("name", list(catalog()))
def test_peano_agrees_across_catalog(tmp_path, name):
    text = BASE.replace("affine-1d", name)
    art = runner.peano_compare(parse(text, tmp_path), [10, 20, 40, 80])
    assert art.summary["final_agreement"] <= max(1e-2, 10 * 0.01)


def test_peano_requires_constant_schedule(tmp_path):
    with pytest.raises(ValueError):
        runner.peano_compare(parse(BASE.replace('kind = "constant"\neps = 0.1', ""), tmp_path), [10, 20])


def test_peano_bad_schedule_exit_code(tmp_path):
    assert main(["peano-compare", str(write(tmp_path, BASE)), "--n", "20,10"]) == 2


# -- list-operators and probe --------------------------------------------------------


def test_list_operators_json(capsys):
    assert main(["list-operators", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) >= 5
    assert all(r["oracle_tag"] for r in rows)
    fixtures = [r for r in rows if r["test_only"]]
    assert fixtures and all("non-monotone" in r["monotonicity"] for r in fixtures)


def test_list_operators_text(capsys):
    assert main(["list-operators"]) == 0
    out = capsys.readouterr().out
    assert "[test-only]" in out
    assert "oracle_tag" in out


def test_probe_catalog_operator(tmp_path, capsys):
    assert main(["probe", str(write(tmp_path, BASE)), "--samples", "200", "--seed", "3"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["sample_count"] == 200 and rep["min_normalized"] >= -1e-12


def test_probe_fixture_fails(tmp_path):
    cfg = write(tmp_path, BASE.replace("affine-1d", "nonmonotone-fixture-1d"))
    assert main(["probe", str(cfg), "--samples", "50"]) == 1


def test_summary_json_is_strict(tmp_path):
    art = runner.run(parse(BASE, tmp_path))
    for p in (art.summary_json, art.diagnostics_json):
        json.loads(p.read_text(), parse_constant=lambda c: pytest.fail(f"non-strict JSON constant {c}"))


def test_schedule_round_trip_in_summary(tmp_path):
    art = runner.run(parse(BASE, tmp_path))
    sched = art.summary["schedule"]
    assert EpsilonSchedule.constant(sched["eps"]).eps(3.0) == 0.1
    assert not math.isnan(art.summary["final_residual"])
