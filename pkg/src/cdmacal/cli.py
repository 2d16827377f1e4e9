"""Command-line interface.

Verbs:
  solve       one throughput point
  sweep       throughput along one configured axis
  validate    one point plus a Monte Carlo delay-violation check
  thresholds  re-estimate mode switching thresholds from capacity

Exit codes: 0 success, 1 configuration or runtime error, 2 a --strict
check failed (invalid bound, failed simulation check, threshold mismatch).
"""
import argparse
import sys

from .amc import default_mode_table, verify_thresholds
from .errors import ConfigError, SlowFadingViolation
from .experiment import (ExperimentSpec, build_spec, parse_config,
                         render_csv, run_experiment, _fmt)


def _add_common(p):
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--snr-avg-db", type=float, dest="snr_avg_db")
    p.add_argument("--alpha", type=float, dest="alpha")
    p.add_argument("--f-m-hz", type=float, dest="f_m_hz")
    p.add_argument("--t-b-s", type=float, dest="t_b_s")
    p.add_argument("--w-hz", type=float, dest="w_hz")
    p.add_argument("--n-b-bits", type=int, dest="n_b_bits")
    p.add_argument("--epsilon", type=float, dest="epsilon")
    p.add_argument("--d-guarantee", type=int, dest="d_guarantee_slots")
    p.add_argument("--horizon", type=int, dest="horizon_slots")
    p.add_argument("--theta-min", type=float, dest="theta_min")
    p.add_argument("--theta-max", type=float, dest="theta_max")
    p.add_argument("--theta-points", type=int, dest="theta_points")
    p.add_argument("--resolution", type=float, dest="resolution_blocks")
    p.add_argument("--tau", type=int, dest="tau_slots")
    p.add_argument("--validate-slots", type=int, dest="validate_slots")
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--output", dest="output", help="CSV destination (default stdout)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true",
                   help="exit 2 if any bound is invalid or a check fails")


_OVERRIDE_KEYS = (
    "snr_avg_db", "alpha", "f_m_hz", "t_b_s", "w_hz", "n_b_bits", "epsilon",
    "d_guarantee_slots", "horizon_slots", "theta_min", "theta_max",
    "theta_points", "resolution_blocks", "tau_slots", "validate_slots",
    "seed", "output",
)


def _build_spec(args, extra=None):
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    if extra:
        overrides.update(extra)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
        return parse_config(text, overrides=overrides)
    values = {k: v for k, v in overrides.items() if v is not None}
    return build_spec(values)


def _emit(spec, rows, args):
    text = render_csv(spec, rows)
    dest = args.output or spec.output
    if dest:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _strict_bad(row):
    if row["error"]:
        return True
    if row["bound_valid"] is False or row["bound_unstable"] is True:
        return True
    freq, se = row["sim_violation_freq"], row["sim_violation_se"]
    if freq != "" and freq > row["epsilon"] + 3 * se:
        return True
    return False


def _run_points(args, extra):
    spec = _build_spec(args, extra)
    rows = run_experiment(spec, workers=args.workers)
    _emit(spec, rows, args)
    if args.strict and any(_strict_bad(r) for r in rows):
        return 2
    return 0


def _cmd_solve(args):
    return _run_points(args, {"sweep_axis": ""})


def _cmd_sweep(args):
    extra = {}
    for name in ("sweep_axis", "sweep_start", "sweep_stop", "sweep_step"):
        val = getattr(args, name)
        if val is not None:
            extra[name] = val
    spec = _build_spec(args, extra)
    if not spec.sweep_axis:
        raise ConfigError("sweep requires sweep_axis (config key or --sweep-axis)")
    rows = run_experiment(spec, workers=args.workers)
    _emit(spec, rows, args)
    if args.strict and any(_strict_bad(r) for r in rows):
        return 2
    return 0


def _cmd_validate(args):
    return _run_points(args, {"sweep_axis": "", "validate": True})


def _cmd_thresholds(args):
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            spec = parse_config(fh.read(), overrides={"snr_avg_db": 0.0,
                                                      "alpha": 0.5,
                                                      "f_m_hz": 1.0})
        table = spec.system.modes
    else:
        table = default_mode_table()
    checks = verify_thresholds(table, tol_db=args.tol_db,
                               target_std_err=args.target_se, seed=args.seed)
    lines = ["# tol_db = %s" % _fmt(args.tol_db),
             "# target_std_err = %s" % _fmt(args.target_se),
             "# seed = %d" % args.seed,
             "mode,label,rate_bits_per_symbol,table_threshold_db,"
             "estimated_threshold_db,error_db,std_err_bits,solvable,within_tol"]
    for c in checks:
        lines.append(",".join(_fmt(x) for x in (
            c.mode_index, c.label, c.rate_bps_hz, c.table_db, c.solved_db,
            c.error_db, c.std_err, c.solvable, c.within_tol)))
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.strict and any(not (c.solvable and c.within_tol) for c in checks):
        return 2
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cdmacal",
        description="Delay-constrained throughput of a randomly spread "
                    "CDMA uplink with linear MMSE detection and adaptive "
                    "modulation/coding.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("solve", help="compute one throughput point")
    _add_common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="compute throughput along one axis")
    _add_common(p)
    p.add_argument("--sweep-axis", dest="sweep_axis")
    p.add_argument("--sweep-start", type=float, dest="sweep_start")
    p.add_argument("--sweep-stop", type=float, dest="sweep_stop")
    p.add_argument("--sweep-step", type=float, dest="sweep_step")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate",
                       help="solve one point and check it by simulation")
    _add_common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("thresholds",
                       help="check mode thresholds against capacity estimates")
    p.add_argument("--config", help="config file supplying a modes: section")
    p.add_argument("--tol-db", type=float, default=0.3)
    p.add_argument("--target-se", type=float, default=0.005)
    p.add_argument("--seed", type=int, default=1009)
    p.add_argument("--output")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_thresholds)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    except SlowFadingViolation as exc:
        print("model error: %s" % exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print("io error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
