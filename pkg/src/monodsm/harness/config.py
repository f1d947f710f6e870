"""TOML experiment configuration with strict key checking.

Example::

    run_id = "affine-1d-const"
    output_dir = "runs"

    [operator]
    catalog = "affine-1d"            # or: family = "affine", matrix = [[1.0]], shift = [1.0]

    [schedule]
    kind = "constant"
    eps = 0.1

    [initial]
    preset = "zero"                  # zero | ones | random | vector

    [integrator]
    method = "rk4"
    dt = 0.01
    t_max = 200.0

    [stop]
    residual_tol = 1e-8

    [[checks]]
    name = "shift_decay"
    tol = 1e-3
    h = [0.1, 0.5, 1.0]
"""

from __future__ import annotations

import copy
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import tomli
import tomli_w

from ..catalog import get_operator
from ..errors import ConfigError
from ..hilbert import KnownSolution, OperatorInstance, OperatorSpec
from ..integrator import CauchyProblem, IntegratorConfig, StopCriteria
from ..schedule import EpsilonSchedule

CHECK_NAMES = {
    "shift_decay": {"h"},
    "derivative_decay": set(),
    "contraction": {"offset"},
    "norm_bound": {"atol"},
    "boundedness": set(),
    "residual_vanishes": {"window"},
}

_TOP_KEYS = {"run_id", "output_dir", "operator", "schedule", "initial", "integrator",
             "stop", "checks", "sweep", "peano"}
_SECTION_KEYS = {
    "operator": {"catalog", "family", "dimension", "matrix", "functions", "shift", "minimal_norm_y"},
    "schedule": {"kind", "eps", "c0", "c1", "b"},
    "initial": {"preset", "values", "seed", "scale"},
    "integrator": {"method", "dt", "t_max", "safety", "local_tol", "stride", "max_step"},
    "stop": {"residual_tol", "divergence_bound"},
    "sweep": {"eps", "final_tol", "norm_tol"},
    "peano": {"T", "n", "gap_tol", "per_delay"},
}
_RUN_ID = re.compile(r"^[A-Za-z0-9._-]+$")

DEFAULT_H = (0.1, 0.5, 1.0)


@dataclass(frozen=True)
class CheckSpec:
    name: str
    tol: float = 1e-3
    params: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    run_id: str
    output_dir: Path
    operator: OperatorInstance
    schedule: EpsilonSchedule
    initial: np.ndarray
    integrator: IntegratorConfig
    stop: StopCriteria
    checks: tuple
    sweep: dict
    peano: dict
    raw: dict

    def problem(self) -> CauchyProblem:
        return CauchyProblem(self.operator, self.schedule, self.initial)

    def echo_text(self) -> str:
        return tomli_w.dumps(self.raw)

    def config_hash(self) -> str:
        return hashlib.sha256(self.echo_text().encode()).hexdigest()


_HEADER = re.compile(r"^\s*(\[\[?)\s*([A-Za-z0-9_.-]+)\s*\]")


def _line_of(source: Optional[str], fieldpath: str) -> Optional[int]:
    """Line of ``fieldpath`` (``key``, ``section.key`` or ``checks[k].key``) in ``source``."""
    if not source:
        return None
    m = re.match(r"^(\w+)(?:\[(\d+)\])?(?:\.(\w+))?$", fieldpath)
    if not m:
        return None
    head, index, key = m.group(1), m.group(2), m.group(3)
    if key is None and index is None:
        section, key, want = "", head, 0
    else:
        section, want = head, int(index or 0)
    key_pat = re.compile(rf"^\s*{re.escape(key)}\s*=") if key else None
    current, seen, header_line = "", {}, None
    for i, line in enumerate(source.splitlines(), 1):
        h = _HEADER.match(line)
        if h:
            current = h.group(2)
            seen[current] = seen.get(current, -1) + 1
            if current == section and seen[current] == want:
                header_line = i
                if key_pat is None:
                    return i
            continue
        if key_pat is not None and current == section and seen.get(section, 0) == want \
                and key_pat.search(line):
            return i
    return header_line


def _err(msg, fieldpath, source):
    return ConfigError(msg, field=fieldpath, line=_line_of(source, fieldpath))


def _reject_unknown(table: dict, allowed: set, prefix: str, source):
    for key in table:
        if key not in allowed:
            path = f"{prefix}.{key}" if prefix else key
            raise _err(f"unknown key (allowed: {sorted(allowed)})", path, source)


def _get(table, key, typ, path, source, default=None, required=False):
    if key not in table:
        if required:
            raise _err("missing required key", path, source)
        return default
    val = table[key]
    if typ is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise _err(f"expected a number, got {val!r}", path, source)
        return float(val)
    if typ is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise _err(f"expected an integer, got {val!r}", path, source)
        return val
    if not isinstance(val, typ):
        raise _err(f"expected {typ.__name__}, got {val!r}", path, source)
    return val


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read and validate a TOML config file. ``overrides`` maps dotted keys to values."""
    path = Path(path)
    try:
        source = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(source, overrides)


def parse_config(source: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    try:
        raw = tomli.loads(source)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", line=int(m.group(1)) if m else None) from exc
    raw = copy.deepcopy(raw)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        *parents, leaf = dotted.split(".")
        node = raw
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return build_config(raw, source)


def build_config(raw: dict, source: Optional[str] = None) -> ExperimentConfig:
    _reject_unknown(raw, _TOP_KEYS, "", source)
    for section, allowed in _SECTION_KEYS.items():
        if section in raw:
            if not isinstance(raw[section], dict):
                raise _err("expected a table", section, source)
            _reject_unknown(raw[section], allowed, section, source)

    run_id = _get(raw, "run_id", str, "run_id", source, required=True)
    if not run_id or not _RUN_ID.match(run_id):
        raise _err("run_id must be nonempty and use only letters, digits, '.', '_' or '-'",
                   "run_id", source)
    output_dir = Path(_get(raw, "output_dir", str, "output_dir", source, default="runs"))

    operator = _build_operator(raw.get("operator"), source)
    schedule = _build_schedule(raw.get("schedule", {}), source)
    initial = _build_initial(raw.get("initial", {}), operator.dimension, source)

    it = raw.get("integrator", {})
    try:
        integrator = IntegratorConfig(
            method=_get(it, "method", str, "integrator.method", source, "rk4"),
            dt=_get(it, "dt", float, "integrator.dt", source, 0.01),
            t_max=_get(it, "t_max", float, "integrator.t_max", source, 100.0),
            safety=_get(it, "safety", float, "integrator.safety", source, 0.9),
            local_tol=_get(it, "local_tol", float, "integrator.local_tol", source, 1e-8),
            stride=_get(it, "stride", int, "integrator.stride", source, None),
            max_step=_get(it, "max_step", float, "integrator.max_step", source, 0.5),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), field="integrator") from exc

    st = raw.get("stop", {})
    try:
        stop = StopCriteria(
            residual_tol=_get(st, "residual_tol", float, "stop.residual_tol", source, 1e-8),
            divergence_bound=_get(st, "divergence_bound", float, "stop.divergence_bound", source, 1e6),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), field="stop") from exc
    if float(np.linalg.norm(initial)) >= stop.divergence_bound:
        raise _err("divergence_bound must exceed the initial norm", "stop.divergence_bound", source)

    checks = _build_checks(raw.get("checks"), schedule, source)
    sweep = _build_sweep(raw.get("sweep", {}), source)
    peano = _build_peano(raw.get("peano", {}), source)
    return ExperimentConfig(run_id, output_dir, operator, schedule, initial, integrator,
                            stop, checks, sweep, peano, raw)


def _build_operator(tab, source) -> OperatorInstance:
    if tab is None:
        raise _err("missing required section", "operator", source)
    if "catalog" in tab:
        extra = set(tab) - {"catalog"}
        if extra:
            raise _err(f"'catalog' cannot be combined with {sorted(extra)}", "operator.catalog", source)
        try:
            return get_operator(_get(tab, "catalog", str, "operator.catalog", source))
        except KeyError as exc:
            raise _err(str(exc.args[0]), "operator.catalog", source) from None
    family = _get(tab, "family", str, "operator.family", source, required=True)
    try:
        spec = OperatorSpec(
            family,
            matrix=tab.get("matrix"),
            functions=tab.get("functions"),
            shift=tab.get("shift"),
        )
    except (ValueError, TypeError) as exc:
        raise _err(str(exc), "operator.family", source) from exc
    dim = _get(tab, "dimension", int, "operator.dimension", source, spec.inferred_dimension())
    if dim is None:
        raise _err("cannot infer dimension; set it explicitly", "operator.dimension", source)
    known = None
    if "minimal_norm_y" in tab:
        known = KnownSolution(True, tuple(float(v) for v in tab["minimal_norm_y"]), "config")
    try:
        return OperatorInstance(spec, dim, known, name=f"config:{family}")
    except ValueError as exc:
        raise _err(str(exc), "operator", source) from exc


def _build_schedule(tab, source) -> EpsilonSchedule:
    kind = _get(tab, "kind", str, "schedule.kind", source, "power-law")
    try:
        if kind == "constant":
            if set(tab) - {"kind", "eps"}:
                raise _err("constant schedule takes only 'eps'", "schedule", source)
            return EpsilonSchedule.constant(_get(tab, "eps", float, "schedule.eps", source, required=True))
        if "eps" in tab:
            raise _err("'eps' applies only to kind = \"constant\"", "schedule.eps", source)
        return EpsilonSchedule(
            kind,
            c0=_get(tab, "c0", float, "schedule.c0", source, 1.0),
            c1=_get(tab, "c1", float, "schedule.c1", source, 1.0),
            b=_get(tab, "b", float, "schedule.b", source, 0.5),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise _err(str(exc), "schedule.kind", source) from exc


def _build_initial(tab, dim, source) -> np.ndarray:
    preset = _get(tab, "preset", str, "initial.preset", source, "zero")
    if preset == "zero":
        return np.zeros(dim)
    if preset == "ones":
        return np.ones(dim)
    if preset == "random":
        seed = _get(tab, "seed", int, "initial.seed", source, 0)
        scale = _get(tab, "scale", float, "initial.scale", source, 1.0)
        return np.random.default_rng(seed).uniform(-scale, scale, size=dim)
    if preset == "vector":
        vals = _get(tab, "values", list, "initial.values", source, required=True)
        if len(vals) != dim:
            raise _err(f"expected {dim} values, got {len(vals)}", "initial.values", source)
        return np.array([float(v) for v in vals])
    raise _err(f"unknown preset {preset!r} (zero, ones, random, vector)", "initial.preset", source)


def _build_checks(entries, schedule, source) -> tuple:
    if entries is None:
        if schedule.is_constant:
            return (CheckSpec("shift_decay", params={"h": DEFAULT_H}),
                    CheckSpec("derivative_decay"), CheckSpec("norm_bound"))
        return (CheckSpec("boundedness"), CheckSpec("residual_vanishes"))
    if not isinstance(entries, list):
        raise _err("expected an array of tables [[checks]]", "checks", source)
    out = []
    for k, entry in enumerate(entries):
        path = f"checks[{k}]"
        name = _get(entry, "name", str, f"{path}.name", source, required=True)
        if name not in CHECK_NAMES:
            raise _err(f"unknown check {name!r}; available: {sorted(CHECK_NAMES)}", f"{path}.name", source)
        _reject_unknown(entry, {"name", "tol"} | CHECK_NAMES[name], path, source)
        tol = _get(entry, "tol", float, f"{path}.tol", source, 1e-3)
        if not tol > 0:
            raise _err("tol must be > 0", f"{path}.tol", source)
        params = {}
        if "h" in entry:
            params["h"] = tuple(float(v) for v in _get(entry, "h", list, f"{path}.h", source))
        elif name == "shift_decay":
            params["h"] = DEFAULT_H
        for key in ("offset", "window", "atol"):
            if key in entry:
                params[key] = _get(entry, key, float, f"{path}.{key}", source)
        out.append(CheckSpec(name, tol, params))
    return tuple(out)


def _build_sweep(tab, source) -> dict:
    eps = tab.get("eps")
    if eps is not None:
        eps = [float(e) for e in _get(tab, "eps", list, "sweep.eps", source)]
    return {
        "eps": eps,
        "final_tol": _get(tab, "final_tol", float, "sweep.final_tol", source, 1e-2),
        "norm_tol": _get(tab, "norm_tol", float, "sweep.norm_tol", source, 1e-3),
    }


def _build_peano(tab, source) -> dict:
    n = tab.get("n")
    if n is not None:
        n = [int(v) for v in _get(tab, "n", list, "peano.n", source)]
    return {
        "T": _get(tab, "T", float, "peano.T", source, 1.0),
        "n": n,
        "gap_tol": _get(tab, "gap_tol", float, "peano.gap_tol", source, 1e-2),
        "per_delay": _get(tab, "per_delay", int, "peano.per_delay", source, 4),
    }
