"""Command line entry point: ``tanakalab <experiment> [--config FILE] [--key value ...]``.

Exit status: 0 when every non-vacuous verdict passes, 1 when one fails,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError
from .config import DEFAULTS, EXPERIMENTS, FIELDS, format_config, make_config, read_config_file
from .experiments import run_experiment

_HELP = {
    "seed": "root seed",
    "replicas": "number of replicas",
    "grid": "t_end,n_steps",
    "kappa": "clock exponent",
    "lambda_list": "comma-separated perturbation strengths",
    "mesh_list": "comma-separated decreasing meshes (2^-10 style allowed)",
    "beta_exponent": "boundary exponent in (1/2, 1)",
    "x_levels": "comma-separated boundary levels",
    "output_dir": "directory for CSV tables and the JSON report",
    "epsilon": "local-time level",
    "horizon": "time horizon",
    "aux_replicas": "replicas of the secondary study",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: config error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tanakalab", description="Run a tanakalab experiment.")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", dest="output_dir", help=_HELP["output_dir"])
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved config and exit")
        p.add_argument("--quiet", action="store_true", help="print only failing verdicts")
        for field in FIELDS:
            if field in ("experiment", "output_dir"):
                continue
            p.add_argument("--" + field.replace("_", "-"), dest=field, metavar="VALUE",
                           help=f"{_HELP.get(field, field)} (default {DEFAULTS[name].get(field, '-')})"
                           if field in DEFAULTS[name] else _HELP.get(field, field))
    return parser


def resolve_config(args: argparse.Namespace):
    pairs = read_config_file(args.config) if args.config else []
    for field in FIELDS:
        if field == "experiment":
            continue
        v = getattr(args, field, None)
        if v is not None:
            pairs.append((field, v))
    return make_config(args.experiment, pairs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(format_config(cfg))
        return 0
    report = run_experiment(cfg)
    for v in report.verdicts:
        if not args.quiet or v.status == "fail":
            print(v.line())
    status = "PASS" if report.passed else "FAIL"
    print(f"{cfg.experiment}: {status} in {report.wall_clock:.1f} s; report in {cfg.output_dir}")
    return 0 if report.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
