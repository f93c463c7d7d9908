"""Command-line front end: ``sselab {ensemble,trajectory,reference,convergence}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .errors import (
    AbortRateExceeded,
    ConfigError,
    IntegrationFailure,
    InvalidParameter,
    StepFailure,
    ZeroNorm,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _common_options() -> argparse.ArgumentParser:
    # SUPPRESS keeps unset flags out of the namespace so the config file can fill them
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--model", choices=experiments.MODELS)
    p.add_argument("--scheme", choices=experiments.SCHEMES)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--omega-r", dest="omega_r", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--omega0", type=float)
    p.add_argument("--k", type=float)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--n0", type=int)
    p.add_argument("--theta", choices=tuple(experiments.THETAS))
    p.add_argument("--functional")
    p.add_argument("--stride", type=int, help="write every stride-th grid point")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="sselab", description="Simulate diffusive stochastic Schroedinger equations."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ens = sub.add_parser("ensemble", parents=[common], help="ensemble mean and stderr")
    ens.add_argument("--trajectories", default=argparse.SUPPRESS,
                     help="comma-separated realization indices to dump (default: none)")
    ens.add_argument("--control-variate", dest="control_variate", action="store_const",
                     const="true", default=argparse.SUPPRESS)
    traj = sub.add_parser("trajectory", parents=[common], help="single realizations")
    traj.add_argument("--trajectories", default=argparse.SUPPRESS,
                      help="comma-separated realization indices (default: 0)")
    sub.add_parser("reference", parents=[common], help="deterministic reference curve")
    conv = sub.add_parser("convergence", parents=[common], help="error versus step size")
    conv.add_argument("--dt-list", dest="dt_list", default=argparse.SUPPRESS,
                      help="comma-separated step sizes, at least two")
    conv.add_argument("--control-variate", dest="control_variate", action="store_const",
                      const="true", default=argparse.SUPPRESS)
    return parser


def config_from_args(ns: argparse.Namespace) -> experiments.ExperimentConfig:
    values = vars(ns).copy()
    command = values.pop("command")
    path = values.pop("config", None)
    merged: dict[str, object] = {}
    if path is not None:
        merged.update(experiments.read_config_file(path))
    merged.update(values)
    if command == "ensemble" and "trajectories" not in merged:
        merged["trajectories"] = ()
    return experiments.build_config(merged, command)


_RUNNERS = {
    "ensemble": experiments.run_ensemble,
    "trajectory": experiments.run_trajectory,
    "reference": experiments.run_reference,
    "convergence": experiments.run_convergence,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        _RUNNERS[ns.command](cfg)
    except (AbortRateExceeded, StepFailure, IntegrationFailure, ZeroNorm) as exc:
        print(f"sselab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, InvalidParameter) as exc:
        print(f"sselab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"sselab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
