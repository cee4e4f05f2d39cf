"""Command-line entry point ``netisac``.

Exit codes: 0 success, 1 config error, 2 solver failure (``solve-once``),
3 detector validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError
from .config import SCHEMES, load_config, load_preset
from .output import emit_results
from .sweep import run_detection_validation, run_sweep, scheme_scenario, solve_once

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3


def _parse_override(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"override {text!r} must look like section.key=value", field=key)
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        # bare strings need no quotes on the command line
        return key.strip(), value


def _load(args, preset="default"):
    config = load_config(args.config) if args.config else load_preset(preset)
    overrides = dict(_parse_override(o) for o in args.override)
    if args.seed is not None:
        overrides["experiment.seed"] = args.seed
    return config.with_overrides(overrides) if overrides else config


def _schemes(args, config):
    schemes = list(config.schemes)
    if args.scheme:
        requested = [s.strip().upper() for s in args.scheme.split(",") if s.strip()]
        bad = [s for s in requested if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme(s) {bad}; choose from {list(SCHEMES)}", field="--scheme")
        schemes = [s for s in SCHEMES if s in requested]
    if args.scenario:
        scen = args.scenario.upper()
        schemes = [s for s in schemes if scheme_scenario(s).value == scen]
    if not schemes:
        raise ConfigError("no schemes left after --scheme/--scenario filtering", field="--scheme")
    return schemes


def _write(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_sweep(args, axis, preset):
    config = _load(args, preset)
    records = run_sweep(config, axis=axis, schemes=_schemes(args, config), jobs=args.jobs, timing=args.timing)
    _write(emit_results(records, None, args.format), args.out)
    return EXIT_OK


def _cmd_validate(args):
    config = _load(args)
    records = run_detection_validation(config, trials=args.trials)
    if args.format == "json":
        text = json.dumps([r.__dict__ for r in records], indent=2) + "\n"
    else:
        lines = ["snr,p_fa,trials,pd_theory,pd_empirical,pfa_empirical,pd_tolerance,pfa_tolerance,passed"]
        for r in records:
            vals = [r.snr, r.p_fa, r.trials, r.pd_theory, r.pd_empirical, r.pfa_empirical, r.pd_tolerance, r.pfa_tolerance]
            lines.append(",".join(format(v, ".17g") for v in vals) + f",{str(r.passed).lower()}")
        text = "\n".join(lines) + "\n"
    _write(text, args.out)
    failed = sum(not r.passed for r in records)
    print(f"{len(records) - failed}/{len(records)} cases within 3-sigma", file=sys.stderr)
    return EXIT_VALIDATION if failed else EXIT_OK


def _cmd_solve_once(args):
    config = _load(args)
    report = solve_once(config, scenario=args.scenario or "I")
    _write(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK if report.feasible else EXIT_SOLVER


def build_parser():
    parser = argparse.ArgumentParser(
        prog="netisac", description="Coordinated ISAC beamforming experiments and detector validation."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (default: built-in preset)")
        p.add_argument("--seed", type=int, help="master seed, overrides experiment.seed")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--scheme", help="comma-separated subset of " + ",".join(SCHEMES))
        p.add_argument("--scenario", choices=("I", "II"), type=str.upper)
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="set a config value, e.g. layout.n_antennas=8 (repeatable)",
        )
        return p

    for name, help_ in (
        ("sweep-power", "sweep P_max at fixed SINR target"),
        ("sweep-sinr", "sweep the SINR target at fixed P_max"),
        ("fig2", "P_max sweep with the fig2 preset"),
        ("fig3", "SINR sweep with the fig3 preset"),
    ):
        p = common(sub.add_parser(name, help=help_))
        p.add_argument("--timing", action="store_true", help="report wall_ms (makes output nondeterministic)")
    common(sub.add_parser("solve-once", help="solve one channel draw and print the report as JSON"))
    p = common(sub.add_parser("validate-detection", help="Monte Carlo check of the closed-form p_D"))
    p.add_argument("--trials", type=int, help="trials per case (default: experiment.trials_mc)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1", field="--jobs")
        if args.command == "sweep-power":
            return _cmd_sweep(args, "p_max", "default")
        if args.command == "sweep-sinr":
            return _cmd_sweep(args, "gamma", "default")
        if args.command == "fig2":
            return _cmd_sweep(args, "p_max", "fig2")
        if args.command == "fig3":
            return _cmd_sweep(args, "gamma", "fig3")
        if args.command == "validate-detection":
            return _cmd_validate(args)
        return _cmd_solve_once(args)
    except ConfigError as exc:
        where = f" (field {exc.field})" if exc.field else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
