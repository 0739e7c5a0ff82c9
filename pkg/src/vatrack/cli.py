"""
Command-line interface.

Exit codes: 0 when every checked criterion holds, 1 when a criterion fails
or a run diverges, 2 for scenario or I/O errors.

The ``<scenario>`` argument is a path to a scenario file or the name of a
built-in scenario (``paper_sec5``, ``instability``).  CSV output goes to the
scenario's ``run.output`` path, resolved against ``$VATRACK_OUTPUT_DIR``
when that variable is set.
"""

import argparse
import os
import sys
from pathlib import Path

from .attitude_error import build_w
from .control import gain_condition_report
from .exceptions import InvalidScenario, NumericalDivergence
from .scenario import builtin_scenario, load_scenario
from .selftest import run_selftest
from .sim import attraction_sweep, instability_experiment, run
from .trace import write_csv

OUTPUT_ENV = "VATRACK_OUTPUT_DIR"

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def resolve_scenario(name):
    path = Path(name)
    if path.exists():
        return load_scenario(path)
    try:
        return builtin_scenario(name)
    except (FileNotFoundError, OSError):
        raise InvalidScenario(f"no scenario file or built-in scenario named {name!r}") from None


def output_path(scenario, override=None):
    if override:
        return Path(override)
    base = os.environ.get(OUTPUT_ENV)
    out = Path(scenario.run.output)
    return Path(base) / out.name if base else out


def _cmd_simulate(args):
    s = resolve_scenario(args.scenario)
    if args.seed is not None:
        s = s.replace(**{"sensors.seed": args.seed})
    trace = run(s)
    path = output_path(s, args.output)
    write_csv(trace, path)
    for key, value in trace.summary.items():
        print(f"{key:<18s} {value:.6g}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_check_gains(args):
    s = resolve_scenario(args.scenario)
    report = gain_condition_report(run(s), s)
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_instability(args):
    s = resolve_scenario(args.scenario)
    js = [args.j] if args.j else [1, 2, 3]
    ok = True
    for j in js:
        rep = instability_experiment(s, j, args.eps)
        if args.eps == 0.0:
            passed = rep.max_z_norm_10s < 1e-8
        else:
            passed = rep.escape_time <= 20.0 and rep.final_z_norm < 1e-4
        ok &= passed
        print(f"j={j} eps={args.eps:g} 2*lambda_w={2 * rep.eigenvalue:.6f} "
              f"escape_time={rep.escape_time:.3f} final_e0={rep.final_e0:+.6f} "
              f"final_z={rep.final_z_norm:.3e} max_z_10s={rep.max_z_norm_10s:.3e} "
              f"{'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_sweep(args):
    s = resolve_scenario(args.scenario)
    rep = attraction_sweep(s, args.n, args.seed, workers=args.workers, noise=args.noise)
    W = build_w(s.reference_set())
    print(f"controller={rep.controller} threshold={rep.threshold:g} "
          f"converged={int(rep.converged.sum())}/{args.n} "
          f"in_B_j={int(rep.in_ball.sum())} diverged={int(rep.diverged.sum())}")
    for i in rep.unexplained_failures:
        print(f"  sample {i}: e0={rep.initial_errors[i].round(4).tolist()} "
              f"final_z={rep.final_z_norm[i]:.3e}")
    print(f"lambda_w = {W.eigenvalues.round(6).tolist()}")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_selftest(args):
    ok = True
    for name, passed, worst in run_selftest(args.seed):
        ok &= bool(passed)
        print(f"{name:<28s} worst={worst:.3e} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="vatrack", description=__doc__.strip().splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run a scenario and write its CSV trace")
    sp.add_argument("scenario")
    sp.add_argument("--output", "-o", help="CSV path (overrides run.output)")
    sp.add_argument("--seed", type=int, help="override sensors.seed")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("check-gains", help="evaluate the stability gain conditions on a run")
    sp.add_argument("scenario")
    sp.set_defaults(func=_cmd_check_gains)

    sp = sub.add_parser("instability", help="escape from the undesired equilibria")
    sp.add_argument("scenario")
    sp.add_argument("--j", type=int, choices=(1, 2, 3), help="equilibrium index (default: all)")
    sp.add_argument("--eps", type=float, default=1e-3, help="initial offset (default 1e-3)")
    sp.set_defaults(func=_cmd_instability)

    sp = sub.add_parser("sweep", help="random initial attitudes, convergence fraction")
    sp.add_argument("scenario")
    sp.add_argument("--n", type=int, default=100, help="number of samples")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1, help="worker processes")
    sp.add_argument("--noise", action="store_true", help="keep the scenario's sensor noise")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("selftest", help="fast algebraic invariant checks")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_selftest)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if not 0.0 <= getattr(args, "eps", 0.0) < 1.0:
        print("error: --eps must lie in [0, 1)", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InvalidScenario as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalDivergence as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

