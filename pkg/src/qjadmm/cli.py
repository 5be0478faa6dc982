"""Command-line experiment driver.

Subcommands: ``run`` (one algorithm at one quantization level), ``sweep``
(the configured algorithm set across the full level sweep), ``compare``
(tabulate finished traces), ``check-params`` (parameter gate only), and
``gen-instance`` (materialize a random instance to a file). Configurations
are JSON files; see ExperimentConfig. The QJADMM_OUT environment variable
supplies a default output directory.
"""

import argparse
import sys
from dataclasses import replace

from .admm import ConsensusStalledError, ParameterValidationError
from .experiment import (
    ExperimentConfig,
    check_params_report,
    compare_traces,
    format_compare_table,
    run_experiment,
)
from .probgen import desk_spec, full_scale_spec, generate, save_instance

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STALLED = 3


def _add_common_run_flags(parser):
    parser.add_argument("--config", required=True, help="experiment config JSON")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--algorithm", default=None, help="override the algorithm")
    parser.add_argument(
        "--delta",
        default=None,
        help="comma-separated quantization levels, e.g. '1e-3,1e-4' (parsed exactly)",
    )
    parser.add_argument(
        "--check-params-only",
        action="store_true",
        help="print per-node threshold margins and exit",
    )
    parser.add_argument(
        "--timings",
        action="store_true",
        help="include the (nondeterministic) wallclock_ms column in trace CSVs",
    )


def _load_config(path, seed=None, out=None, algorithm=None, delta=None):
    try:
        config = ExperimentConfig.load(path)
    except FileNotFoundError:
        print(f"config file not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    except (ValueError, KeyError, TypeError) as exc:
        print(f"invalid config {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    overrides = {}
    if out is not None:
        overrides["output_dir"] = out
    if algorithm is not None:
        overrides["algorithm"] = algorithm
    if delta is not None:
        overrides["delta_sweep"] = tuple(s.strip() for s in delta.split(","))
    if overrides:
        try:
            config = replace(config, **overrides)
        except ValueError as exc:
            print(f"invalid override: {exc}", file=sys.stderr)
            raise SystemExit(EXIT_CONFIG)
    if seed is not None:
        config = replace(config, admm=replace(config.admm, master_seed=seed))
    return config


def _load_run_config(args):
    return _load_config(
        args.config,
        seed=args.seed,
        out=args.out,
        algorithm=args.algorithm,
        delta=args.delta,
    )


def _print_param_report(config):
    report = check_params_report(config)
    for line in report.summary_lines():
        print(line)
    if not report.all_passed:
        offenders = ", ".join(str(e.node) for e in report.failures)
        print(f"parameter gate FAILED at node(s): {offenders}", file=sys.stderr)
        return EXIT_CONFIG
    print("parameter gate passed")
    return EXIT_OK


def _execute(config, include_wallclock):
    try:
        manifest = run_experiment(config, include_wallclock=include_wallclock, echo=print)
    except ParameterValidationError as exc:
        print(f"parameter validation failed: {exc}", file=sys.stderr)
        for line in exc.report.summary_lines():
            print(line, file=sys.stderr)
        return EXIT_CONFIG
    except ConsensusStalledError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STALLED
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"metadata: {manifest['metadata']}")
    return EXIT_OK


def _cmd_run(args):
    config = _load_run_config(args)
    if args.check_params_only:
        return _print_param_report(config)
    if config.algorithm == "all":
        print(
            "run executes a single algorithm; pass --algorithm or use 'sweep'",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    if config.delta_sweep:
        config = replace(config, delta_sweep=(config.delta_sweep[0].spec_string,))
    return _execute(config, args.timings)


def _cmd_sweep(args):
    config = _load_run_config(args)
    if args.check_params_only:
        return _print_param_report(config)
    return _execute(config, args.timings)


def _cmd_compare(args):
    try:
        rows = compare_traces(args.traces)
    except (ValueError, FileNotFoundError) as exc:
        print(f"cannot compare traces: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(format_compare_table(rows))
    return EXIT_OK


def _cmd_check_params(args):
    config = _load_config(args.config)
    return _print_param_report(config)


def _cmd_gen_instance(args):
    if args.config is not None:
        config = _load_config(args.config)
        spec = config.instance
        rho, gamma = config.admm.rho, config.admm.gamma
    else:
        spec = full_scale_spec() if args.preset == "full" else desk_spec()
        rho, gamma = 0.01, 1.0
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    problems, b = generate(spec, rho=rho, gamma=gamma)
    save_instance(problems, b, args.out)
    print(f"wrote instance with {len(problems)} nodes to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qjadmm",
        description="quantized distributed proximal Jacobian ADMM experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one algorithm at one quantization level")
    _add_common_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the configured sweep")
    _add_common_run_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cmp = sub.add_parser("compare", help="tabulate finished trace CSVs")
    p_cmp.add_argument("traces", nargs="+", help="trace CSV paths")
    p_cmp.set_defaults(func=_cmd_compare)

    p_chk = sub.add_parser("check-params", help="run the parameter gate and exit")
    p_chk.add_argument("--config", required=True)
    p_chk.set_defaults(func=_cmd_check_params)

    p_gen = sub.add_parser("gen-instance", help="write a random instance file")
    p_gen.add_argument("--config", default=None, help="take dimensions from this config")
    p_gen.add_argument("--preset", choices=("desk", "full"), default="desk")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--out", required=True, help="instance file to write")
    p_gen.set_defaults(func=_cmd_gen_instance)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    code = args.func(args)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
