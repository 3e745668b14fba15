# seawaylib/cli.py
import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from seawaylib.config import HAS_TOML, configure_logging, get_config_path, load_config, save_config
from seawaylib.errors import RunAborted, SeawayError
from seawaylib.nlp import check_gradients
from seawaylib.ocp import assemble, initial_guess
from seawaylib.paths import get_output_dir
from seawaylib.planner import ControllerVariant, PlannerMemory, build_problem, compare_runs, run_closed_loop
from seawaylib.resolution import get_scenario_with_source
from seawaylib.scenario import load_scenario, save_scenario
from seawaylib.tables import read_log, write_comparison, write_log, write_plot_script, write_summary

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ABORTED = 2
EXIT_UNSAFE = 3
EXIT_USAGE = 64

SAFETY_TOL = 1e-5
GRADIENT_TOL = 1e-4

CONTROLLERS = [v.cli_name for v in ControllerVariant]

FIGURES = {
    "4": [ControllerVariant.MPC_NOMINAL],
    "5": [ControllerVariant.RMPC_CBF],
    "7": [ControllerVariant.RMPC_HARD_BORDER, ControllerVariant.RMPC_CBF],
    "8": [ControllerVariant.RMPC_CBF, ControllerVariant.MPC_NOMINAL, ControllerVariant.RMPC_HARD_BORDER],
}


class UsageParser(argparse.ArgumentParser):
    """argparse with the sysexits usage code instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser():
    parser = UsageParser(prog="seaway", description="Robust MPC-CBF surface vessel simulator")
    parser.add_argument(
        "--log-level",
        choices=["error", "info", "debug", "trace"],
        help="Diagnostic verbosity on stderr (default: $ASV_LOG_LEVEL, config, or info)",
    )
    subparsers = parser.add_subparsers(dest="command", parser_class=UsageParser, help="Command to run")

    def scenario_arg(p):
        p.add_argument("--scenario", help="Scenario TOML file (default: $SEAWAY_SCENARIO, config, or shipped)")

    def trace_arg(p):
        p.add_argument("--trace", metavar="FILE", help="Write one line per SQP iteration of every solve")

    run_parser = subparsers.add_parser("run", help="Simulate one controller on a scenario")
    scenario_arg(run_parser)
    run_parser.add_argument("--controller", choices=CONTROLLERS, default="rmpc-cbf", help="Controller variant")
    run_parser.add_argument("--out", help="Output directory (default: out_dir from config)")
    run_parser.add_argument("--steps", type=int, help="Override the step cap")
    run_parser.add_argument("--thrusters", action="store_true", help="Add actuator force columns f1..f3")
    run_parser.add_argument(
        "--flow",
        dest="flow",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Enable or disable the water-flow field (default: from scenario)",
    )
    run_parser.add_argument("--flow-amplitude", type=float, help="Scale the water-flow field")
    trace_arg(run_parser)

    compare_parser = subparsers.add_parser(
        "compare", aliases=["cmp"], help="Run all controllers and write aligned comparison tables"
    )
    scenario_arg(compare_parser)
    compare_parser.add_argument("--out", help="Output directory (default: out_dir from config)")
    compare_parser.add_argument("--jobs", type=int, default=1, help="Variants run in parallel (default: 1)")
    compare_parser.add_argument("--steps", type=int, help="Override the step cap")
    compare_parser.add_argument(
        "--from-logs", nargs="+", metavar="CSV", help="Compare existing trajectory CSVs instead of running"
    )
    trace_arg(compare_parser)

    validate_parser = subparsers.add_parser("validate", help="Load and validate a scenario")
    scenario_arg(validate_parser)
    validate_parser.add_argument(
        "--check-gradients",
        action="store_true",
        help="Compare OCP derivatives with central differences at the start state",
    )

    figure_parser = subparsers.add_parser("figure", help="Preset controller sets on one scenario")
    figure_parser.add_argument("number", choices=sorted(FIGURES), help="Figure preset")
    scenario_arg(figure_parser)
    figure_parser.add_argument("--out", help="Output directory (default: out_dir from config)")
    figure_parser.add_argument("--jobs", type=int, default=1, help="Variants run in parallel (default: 1)")
    figure_parser.add_argument("--steps", type=int, help="Override the step cap")
    trace_arg(figure_parser)

    plot_parser = subparsers.add_parser("plot-script", help="Write a matplotlib script for the CSVs")
    plot_parser.add_argument("--out", help="Output directory (default: out_dir from config)")

    default_parser = subparsers.add_parser(
        "default-scenario", help="Set or show the default scenario in the user config"
    )
    default_parser.add_argument("path", nargs="?", help="Scenario file (omit to show current)")
    return parser


def _fail(message, hints=(), code="E000", exit_code=EXIT_INVALID):
    print(f"Error [{code}]: {message}", file=sys.stderr)
    for hint in hints:
        if hint:
            print(f"hint: {hint}", file=sys.stderr)
    return exit_code


def _resolve_scenario(explicit):
    path, source, meta = get_scenario_with_source(explicit)
    if path is None:
        if source == "env_invalid":
            _fail(
                f"SEAWAY_SCENARIO points to a missing file: {meta.get('env')}",
                ["Set with: export SEAWAY_SCENARIO=/path/to/scenario.toml", "Or unset it to use the default"],
                code="E202",
            )
        else:
            _fail(
                f"default_scenario in config is missing: {meta.get('config')}",
                ["Update it by running: seaway default-scenario /path/to/scenario.toml",
                 f"Or edit config: {get_config_path()}"],
                code="E203",
            )
        return None
    return path


def _out_dir(args):
    return get_output_dir(args.out or load_config().get("out_dir") or "runs")


def _run_variant(cfg, variant_name, trace_path, step_cap):
    """Worker for sequential and process-pool runs."""
    variant = ControllerVariant.parse(variant_name)
    if trace_path:
        with open(trace_path, "a") as trace:
            return run_closed_loop(cfg, variant, trace=trace, step_cap=step_cap)
    return run_closed_loop(cfg, variant, step_cap=step_cap)


def run_variants(cfg, variants, jobs=1, trace=None, step_cap=None):
    """Closed-loop runs in the given order; jobs > 1 uses a process pool."""
    names = [v.cli_name for v in variants]
    if jobs <= 1 or len(variants) == 1:
        return [_run_variant(cfg, name, trace, step_cap) for name in names]
    traces = [f"{trace}.{name}" if trace else None for name in names]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_variant, cfg, name, t, step_cap) for name, t in zip(names, traces)]
        return [f.result() for f in futures]


def _exit_code(logs):
    code = EXIT_OK
    for log in logs:
        if log.aborted:
            print(f"{log.variant.cli_name}: run aborted: {log.abort_reason}", file=sys.stderr)
            code = max(code, EXIT_ABORTED)
        if log.variant is ControllerVariant.RMPC_CBF and log.safety_violated(SAFETY_TOL):
            print(
                f"{log.variant.cli_name}: safety violation, min h = {log.min_margin():.3e}",
                file=sys.stderr,
            )
            code = max(code, EXIT_UNSAFE)
    return code


def _write_logs(logs, out, cfg, prefix="", with_thrusters=False):
    for log in logs:
        path = os.path.join(out, f"{prefix}{log.variant.cli_name}.csv")
        write_log(log, path, vessel=cfg.vessel if cfg else None, with_thrusters=with_thrusters)
        print(path)


def _write_comparison(logs, out, prefix=""):
    rep = compare_runs(logs)
    comparison = os.path.join(out, f"{prefix}comparison.csv")
    summary = os.path.join(out, f"{prefix}summary.toml")
    write_comparison(rep, comparison)
    write_summary(rep, summary)
    print(comparison)
    print(summary)
    for label in rep.labels:
        s = rep.summary[label]
        print(
            f"{label}: arrival={s['arrival_time']:.1f}s cost={s['total_cost']:.4g} "
            f"min_h={s['min_margin']:.4g} max|dtau|={s['max_dtau']:.3g}",
            file=sys.stderr,
        )


def cmd_run(args, cfg):
    if args.flow is not None or args.flow_amplitude is not None:
        cfg = cfg.with_flow(enabled=args.flow, amplitude=args.flow_amplitude)
    out = _out_dir(args)
    logs = run_variants(cfg, [ControllerVariant.parse(args.controller)], trace=args.trace, step_cap=args.steps)
    _write_logs(logs, out, cfg, with_thrusters=args.thrusters)
    return _exit_code(logs)


def cmd_compare(args, cfg):
    out = _out_dir(args)
    if args.from_logs:
        logs = [read_log(p) for p in args.from_logs]
    else:
        logs = run_variants(cfg, FIGURES["8"], jobs=args.jobs, trace=args.trace, step_cap=args.steps)
        _write_logs(logs, out, cfg)
    _write_comparison(logs, out)
    return _exit_code(logs)


def cmd_figure(args, cfg):
    out = _out_dir(args)
    prefix = f"fig{args.number}_"
    save_scenario(cfg, os.path.join(out, f"{prefix}scenario.toml"))
    logs = run_variants(cfg, FIGURES[args.number], jobs=args.jobs, trace=args.trace, step_cap=args.steps)
    _write_logs(logs, out, cfg, prefix=prefix)
    if len(logs) > 1:
        _write_comparison(logs, out, prefix=prefix)
    return _exit_code(logs)


def cmd_validate(args, cfg):
    print(f"OK {cfg.source} hash={cfg.config_hash}")
    print(
        f"{cfg.name}: {len(cfg.obstacles)} obstacles, {len(cfg.borders)} borders, "
        f"N={cfg.N}, Ts={cfg.Ts}, N_w={cfg.disturbance.n_levels}",
        file=sys.stderr,
    )
    if args.check_gradients:
        x0 = np.array([cfg.start[0], cfg.start[1], cfg.start[2], 0.0, 0.0, 0.0])
        problem = build_problem(x0, PlannerMemory(), cfg, cfg.variant)
        z = initial_guess(problem)
        rng = np.random.default_rng(0)
        z = z + 0.1 * rng.standard_normal(z.size)
        err = check_gradients(assemble(problem), z)
        print(f"gradient check: max relative error {err:.3e}")
        if err > GRADIENT_TOL:
            return _fail(
                f"Analytic derivatives disagree with finite differences ({err:.3e} > {GRADIENT_TOL:g})",
                code="E401",
            )
    return EXIT_OK


def cmd_default_scenario(args):
    if args.path:
        path = os.path.abspath(os.path.expanduser(args.path))
        if not HAS_TOML:
            return _fail("Config file not updated (TOML support not available)")
        config = load_config()
        config["default_scenario"] = path
        save_config(config)
        print(f"Default scenario set to {path}", file=sys.stderr)
        print(path)
    else:
        current = load_config().get("default_scenario")
        print(current if current else "No default scenario configured (using the shipped one)")
    return EXIT_OK


def dispatch(args):
    if args.command is None:
        build_parser().print_help(sys.stderr)
        return EXIT_USAGE
    if args.command == "plot-script":
        print(write_plot_script(_out_dir(args)))
        return EXIT_OK
    if args.command == "default-scenario":
        return cmd_default_scenario(args)

    path = _resolve_scenario(getattr(args, "scenario", None))
    if path is None:
        return EXIT_INVALID
    try:
        cfg = load_scenario(path)
        if args.command == "validate":
            return cmd_validate(args, cfg)
        if args.command == "run":
            return cmd_run(args, cfg)
        if args.command in ("compare", "cmp"):
            return cmd_compare(args, cfg)
        if args.command == "figure":
            return cmd_figure(args, cfg)
    except RunAborted as e:
        return _fail(str(e), [e.hint], code=e.code, exit_code=EXIT_ABORTED)
    except SeawayError as e:
        return _fail(str(e), [e.hint], code=e.code)
    return EXIT_USAGE


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    sys.exit(dispatch(args))
