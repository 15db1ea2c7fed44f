"""Command line entry point: ``fracdt run|list|validate-config``."""

import argparse
import os
import sys

from . import __version__
from .experiments import EXPERIMENTS, ConfigError, check_golden, load_config, resolve, run_experiment
from .experiments.config import with_seed
from .kernels import CACHE_ENV

DESCRIPTIONS = {
    "l2_bound": "uniform L2 bound of T_N over random (v, N, f)",
    "kernel_bounds": "pointwise heat-kernel bounds (i)-(iv) and closed-form agreement",
    "cz_bounds": "size and smoothness of the kernels K_N over widening windows",
    "cotlar": "Cotlar-type ratio T*_M f / (M(T f) + M_q f)",
    "weak_type": "weighted weak (1,1) levels of T* on normalized spikes",
    "weighted_lp": "L^p(|x|^beta) bounds of T* for admissible power weights",
    "bmo_check": "BMO norm of T_N f for bounded f over widening windows",
    "local_growth": "growth of averages of T* f on small balls",
    "convergence": "decay rates of the high and low index tails",
    "lacunary_equiv": "ratio normalization of lacunary sequences and transform equivalence",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fracdt", description="Numerical checks for fractional differential transforms.")
    parser.add_argument("--version", action="version", version=f"fracdt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--config", help="YAML config (defaults are used for missing keys)")
    run.add_argument("--out", help="output directory (default: output.dir from the config)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--golden-update", action="store_true", help="rewrite stored golden values")

    sub.add_parser("list", help="list experiments")

    val = sub.add_parser("validate-config", help="check a config file")
    val.add_argument("path")
    val.add_argument("--experiment", choices=EXPERIMENTS, help="experiment to validate against")
    return parser


def _cmd_list():
    for exp in EXPERIMENTS:
        print(f"{exp:16s} {DESCRIPTIONS[exp]}")
    return 0


def _cmd_validate(args):
    try:
        cfg = load_config(args.path, args.experiment)
    except (ConfigError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    print(f"ok: {cfg['experiment']}")
    return 0


def _cmd_run(args):
    try:
        cfg = load_config(args.config, args.experiment) if args.config else resolve({}, args.experiment)
        if args.seed is not None:
            cfg = with_seed(cfg, args.seed)
    except (ConfigError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    out_root = args.out or cfg["output"]["dir"]
    if cfg["output"].get("cache_dir") is None and os.environ.get(CACHE_ENV):
        cfg["output"]["cache_dir"] = os.environ[CACHE_ENV]
    report = run_experiment(cfg)
    out_dir = os.path.join(out_root, args.experiment)
    report.write(out_dir)
    golden_dir = cfg["output"].get("golden_dir") or os.path.join(out_root, "goldens")
    status, mismatches = check_golden(report, golden_dir, args.golden_update, cfg["tolerances"]["golden_rtol"])
    for name, ok in sorted(report.verdicts.items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"golden: {status}")
    for m in mismatches:
        print(f"  {m['key']}: golden {m['golden']} current {m['current']}")
    print(f"{args.experiment}: {report.status} -> {out_dir}")
    if report.inconclusive:
        return 3
    return 0 if report.passed and status != "mismatch" else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        return _cmd_list()
    if args.command == "validate-config":
        return _cmd_validate(args)
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
