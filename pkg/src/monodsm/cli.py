"""Command line interface: ``monodsm <verb> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigError, DSMError
from .harness import config as cfgmod
from .harness import runner

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _float_list(text):
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _add_overrides(p):
    p.add_argument("config", help="TOML experiment config")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--dt", type=float, help="override integrator.dt")
    p.add_argument("--t-max", type=float, dest="t_max", help="override integrator.t_max")
    p.add_argument("--tol", type=float, help="override stop.residual_tol")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="monodsm",
        description="Dynamical systems method for monotone operator equations.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="integrate one flow and run its diagnostics")
    _add_overrides(p)

    p = sub.add_parser("sweep-eps", help="regularization path over decreasing eps")
    _add_overrides(p)
    p.add_argument("--eps", type=_float_list, help="strictly decreasing eps list, e.g. '0.1,0.01'")

    p = sub.add_parser("peano-compare", help="delayed-integral scheme vs RK4 flow")
    _add_overrides(p)
    p.add_argument("--n", type=_int_list, help="increasing delay indices, e.g. '10,20,40'")

    p = sub.add_parser("list-operators", help="describe the operator catalog")
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("probe", help="sampled monotonicity probe of the configured operator")
    p.add_argument("config")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=float, default=10.0)
    return parser


def _load(args):
    overrides = {
        "output_dir": getattr(args, "out", None),
        "integrator.dt": getattr(args, "dt", None),
        "integrator.t_max": getattr(args, "t_max", None),
        "stop.residual_tol": getattr(args, "tol", None),
    }
    return cfgmod.load_config(args.config, overrides)


def _print_catalog(as_json):
    rows = runner.list_operators()
    if as_json:
        print(json.dumps(rows, indent=2))
        return
    for r in rows:
        flag = "  [test-only]" if r["test_only"] else ""
        print(f"{r['name']}{flag}")
        print(f"    family      : {r['family']} (dimension {r['dimension']})")
        print(f"    parameters  : {json.dumps(r['parameters'])}")
        print(f"    description : {r['description']}")
        print(f"    monotone by : {r['monotonicity']}")
        y = r["minimal_norm_y"]
        print(f"    solution    : {'none' if not r['has_solution'] else y}  (oracle_tag: {r['oracle_tag']})")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "list-operators":
            _print_catalog(args.json)
            return EXIT_OK
        if args.verb == "probe":
            config = cfgmod.load_config(args.config)
            report = runner.probe(config, args.samples, args.seed, args.radius)
            print(json.dumps(report.to_dict(), indent=2))
            return EXIT_OK if report.passed else EXIT_FAIL
        config = _load(args)
        if args.verb == "run":
            art = runner.run(config)
        elif args.verb == "sweep-eps":
            art = runner.sweep_eps(config, args.eps)
        else:
            art = runner.peano_compare(config, args.n)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DSMError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    s = art.summary
    status = s.get("status", "")
    print(f"{s['kind']} {s['run_id']}: {status + ', ' if status else ''}"
          f"diagnostics {'pass' if art.overall else 'FAIL'} -> {art.run_dir}")
    return art.exit_code


if __name__ == "__main__":
    sys.exit(main())
