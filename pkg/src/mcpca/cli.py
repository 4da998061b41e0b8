"""Command-line entry point.

Subcommands:
  spectrum   chain diagnostics (stationary law, |lambda2|, mixing profile),
             optionally the total-covariance eigenvalues
  simulate   run an experiment or sweep from a config file, write CSV/SVG
  verify     run the small-instance verification suites; any violation is
             printed as one tab-separated line and exits with code 2
  plot       re-render an existing results CSV as SVG curves

Exit codes: 0 success, 1 usage error, 2 oracle violation,
3 numerical/degenerate error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import (ConfigError, DegenerateGapError, EmptyTraceError,
                     ErgodicityError, ReversibilityError)

USAGE_EXIT = 1
VIOLATION_EXIT = 2
NUMERICAL_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mcpca", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("spectrum", help="chain spectral and mixing diagnostics")
    sp.add_argument("--rho", type=float, required=True)
    sp.add_argument("--states", type=int, required=True)
    sp.add_argument("--covariance", action="store_true",
                    help="also print total-covariance eigenvalues")
    sp.add_argument("--dim", type=int, default=50)
    sp.add_argument("--sigma-beta", type=float, default=1.0)
    sp.add_argument("--noise", choices=["bernoulli", "uniform"], default="bernoulli")
    sp.add_argument("--seed", type=int, default=20240)

    sim = sub.add_parser("simulate", help="run an experiment described by a config file")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)

    ver = sub.add_parser("verify", help="run the verification suites")
    ver.add_argument("--suite", required=True,
                     choices=["qnorm", "covdecay", "prodapprox", "revmix", "all"])
    ver.add_argument("--seed", type=int, default=None)
    ver.add_argument("--instances", type=int, default=100)

    pl = sub.add_parser("plot", help="render a results CSV as SVG curves")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--out", required=True)
    return parser


def _cmd_spectrum(args) -> int:
    from .markov import analyze_spectrum, make_rho_chain, mixing_profile
    from .seeds import mix64
    from .statedist import make_benchmark_states, total_covariance

    chain = make_rho_chain(args.states, args.rho)
    spectrum = analyze_spectrum(chain)
    prof = mixing_profile(chain, spectrum)
    print("pi\t" + "\t".join(repr(float(x)) for x in spectrum.stationary))
    print(f"lambda2_abs\t{spectrum.lambda2_abs!r}")
    print(f"tau_mix_quarter\t{prof.tau_mix_quarter}")
    for t in range(1, 21):
        print(f"d_mix\t{t}\t{prof.d_mix(t)!r}")
    if args.covariance:
        dist = make_benchmark_states(args.states, args.dim, args.sigma_beta,
                                 seed=mix64(args.seed, 0), noise=args.noise)
        truth = total_covariance(dist, spectrum.stationary)
        print("sigma_eigenvalues\t"
              + "\t".join(repr(float(v)) for v in truth.eigenvalues))
    return 0


def _cmd_simulate(args) -> int:
    from .harness import emit, meta_text, parse_config, run_experiment, sweep

    with open(args.config, "r", encoding="utf-8") as fh:
        config = parse_config(fh.read())
    os.makedirs(args.out, exist_ok=True)

    def write(table, stem):
        emit(table, "csv", os.path.join(args.out, stem + ".csv"))
        emit(table, "svg-lines", os.path.join(args.out, stem + ".svg"))
        with open(os.path.join(args.out, stem + ".meta.txt"), "w",
                  encoding="utf-8", newline="") as fh:
            fh.write(meta_text(table))
        print(os.path.join(args.out, stem + ".csv"))

    if config.swept_field() is None:
        write(run_experiment(config), "results")
    else:
        for table in sweep(config):
            name = table.meta["swept_field"]
            value = table.meta["swept_value"]
            write(table, f"results_{name}_{value:g}")
    return 0


def _cmd_verify(args) -> int:
    from .oracle import DEFAULT_CORPUS_SEED, run_suite

    seed = DEFAULT_CORPUS_SEED if args.seed is None else args.seed
    checks, violations = run_suite(args.suite, n_instances=args.instances,
                                   master_seed=seed)
    for v in violations:
        print(v.line())
    sys.stderr.write(f"{args.suite}: {args.instances} instances, {checks} checks, "
                     f"{len(violations)} violations\n")
    return VIOLATION_EXIT if violations else 0


def _cmd_plot(args) -> int:
    from .harness import emit, from_csv

    with open(args.csv, "r", encoding="utf-8") as fh:
        table = from_csv(fh.read())
    emit(table, "svg-lines", args.out)
    print(args.out)
    return 0


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, OSError, ValueError) as exc:
        if isinstance(exc, (ErgodicityError, ReversibilityError,
                            DegenerateGapError, EmptyTraceError)):
            sys.stderr.write(f"numerical error: {exc}\n")
            return NUMERICAL_EXIT
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_EXIT
    except (ArithmeticError, AssertionError) as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return NUMERICAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
