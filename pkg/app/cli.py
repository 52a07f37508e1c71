"""Command line entry point: python -m app.cli {solve,gen,convert,bench} ..."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import ValidationError

from .bench.experiment import SUITES, build_suite, default_specs, run_experiment
from .bench.generators import gen_random_id, gen_sensor_id
from .errors import MeuError, ResourceCapError
from .evaluate import policy_map
from .formats.convert import bn_to_id
from .formats.idfile import read_id, write_id
from .formats.traces import write_trace
from .formats.uai import read_uai
from .models import AlgorithmSpec, InfluenceDiagram, RandomIdConfig, SensorNetConfig
from .solvers.restarts import run_with_restarts

logger = logging.getLogger("app.cli")

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 1, 2
_MODES = {"add": "additive", "mul": "multiplicative"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def read_config(path: str | Path) -> Dict[str, Any]:
    """key=value lines; values typed with yaml.safe_load; keys are flag names without dashes."""
    out: Dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{line_no}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = yaml.safe_load(value) if value else None
    return out


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algo", choices=["spu", "bp0", "anneal", "anneal-perturbed", "prox"], default="prox")
    p.add_argument("--w", choices=["one", "harmonic"], default="one", help="proximal weight schedule")
    p.add_argument("--junction", choices=["tree", "loopy"], default="tree")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=AlgorithmSpec().tol)
    p.add_argument("--max-iters", type=int, default=AlgorithmSpec().max_iters)
    p.add_argument("--inner-iters", type=int, default=AlgorithmSpec().inner_iters)
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--perturbation", type=float, default=AlgorithmSpec().perturbation_scale)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="python -m app.cli", description="MEU solvers for influence diagrams")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="solve one diagram")
    src = solve.add_mutually_exclusive_group()
    src.add_argument("--id", help="influence diagram text file")
    src.add_argument("--uai", help="UAI Bayes net, converted before solving")
    solve.add_argument("--decisions", type=float, default=0.0, help="decision fraction for --uai")
    _add_solver_flags(solve)
    solve.add_argument("--out", help="trace CSV destination")
    solve.add_argument("--config")

    gen = sub.add_parser("gen", help="generate a diagram")
    gen.add_argument("--kind", choices=["random", "sensor"], default="random")
    gen.add_argument("--n-vars", type=int, default=RandomIdConfig().n_vars)
    gen.add_argument("--max-parents", type=int, default=RandomIdConfig().max_parents)
    gen.add_argument("--card", type=int, default=RandomIdConfig().cardinality)
    gen.add_argument("--decisions", type=float, default=RandomIdConfig().decision_fraction)
    gen.add_argument("--alpha", type=float, default=RandomIdConfig().dirichlet_alpha)
    gen.add_argument("--gamma-alpha", type=float, default=RandomIdConfig().gamma_alpha)
    gen.add_argument("--mode", choices=sorted(_MODES), default="add")
    gen.add_argument("--no-forgetting", action="store_true")
    gen.add_argument("--width", type=int, default=SensorNetConfig().width)
    gen.add_argument("--height", type=int, default=SensorNetConfig().height)
    gen.add_argument("--coupling", type=float, default=SensorNetConfig().coupling)
    gen.add_argument("--cost", type=float, default=SensorNetConfig().cost)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out")
    gen.add_argument("--config")

    convert = sub.add_parser("convert", help="UAI Bayes net to influence diagram")
    convert.add_argument("--uai", required=True)
    convert.add_argument("--decisions", type=float, default=0.0)
    convert.add_argument("--seed", type=int, default=0)
    convert.add_argument("--mode", choices=sorted(_MODES), default="mul")
    convert.add_argument("--out")
    convert.add_argument("--config")

    bench = sub.add_parser("bench", help="run an experiment suite")
    bench.add_argument("--suite", choices=SUITES, default="random20")
    bench.add_argument("--trials", type=int, default=20)
    bench.add_argument("--algo", choices=["spu", "bp0", "anneal", "anneal-perturbed", "prox"], action="append")
    bench.add_argument("--w", choices=["one", "harmonic"], default=None)
    bench.add_argument("--junction", choices=["tree", "loopy"], action="append")
    bench.add_argument("--restarts", type=int, default=1)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--uai")
    bench.add_argument("--decisions", type=float, default=None)
    bench.add_argument("--n-vars", type=int, default=RandomIdConfig().n_vars)
    bench.add_argument("--out")
    bench.add_argument("--config")
    return parser


def _subcommands(parser: argparse.ArgumentParser) -> Dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return dict(action.choices)
    return {}


def _apply_config(parser: argparse.ArgumentParser, argv: List[str]) -> None:
    """Config file values become subcommand defaults, so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    commands = _subcommands(parser)
    command = next((a for a in argv if a in commands), None)
    if command is None:
        return
    sp = commands[command]
    values = read_config(known.config)
    unknown = set(values) - {a.dest for a in sp._actions}
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {', '.join(sorted(unknown))}")
    sp.set_defaults(**values)


def _spec(args) -> AlgorithmSpec:
    return AlgorithmSpec(
        variant=args.algo,
        junction=args.junction,
        weights=args.w,
        restarts=args.restarts,
        seed=args.seed,
        tol=args.tol,
        max_iters=args.max_iters,
        inner_iters=args.inner_iters,
        damping=args.damping,
        perturbation_scale=args.perturbation,
    )


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    if args.id:
        diagram: InfluenceDiagram = read_id(args.id)
    elif args.uai:
        diagram = bn_to_id(read_uai(args.uai), args.decisions, args.seed)
    else:
        raise UsageError("solve needs --id or --uai")
    result = run_with_restarts(diagram, _spec(args))
    print(f"MEU {result.eu!r}")
    print(f"log MEU {result.log_eu!r}")
    print(f"algorithm {result.algorithm} junction {result.junction} restart {result.restart_index} iterations {result.iterations}")
    for d, choices in policy_map(result.strategy).items():
        print(f"decision {d}: {' '.join(map(str, choices))}")
    if args.out:
        write_trace([r for run in result.restart_traces for r in run], args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.kind == "random":
        cfg = RandomIdConfig(
            n_vars=args.n_vars,
            max_parents=args.max_parents,
            cardinality=args.card,
            decision_fraction=args.decisions,
            dirichlet_alpha=args.alpha,
            gamma_alpha=args.gamma_alpha,
            utility_mode=_MODES[args.mode],
            no_forgetting=args.no_forgetting,
            seed=args.seed,
        )
        diagram = gen_random_id(cfg)
    else:
        cfg = SensorNetConfig(width=args.width, height=args.height, coupling=args.coupling, cost=args.cost, seed=args.seed)
        diagram = gen_sensor_id(cfg)
    _emit(write_id(diagram), args.out)
    return EXIT_OK


def cmd_convert(args) -> int:
    diagram = bn_to_id(read_uai(args.uai), args.decisions, args.seed, _MODES[args.mode])
    _emit(write_id(diagram), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    network = read_uai(args.uai) if args.uai else None
    models = build_suite(
        args.suite,
        args.trials,
        args.seed,
        random_cfg=RandomIdConfig(n_vars=args.n_vars),
        network=network,
        decision_fraction=args.decisions,
    )
    specs = default_specs(args.restarts, args.seed, junctions=args.junction or ("tree", "loopy"))
    if args.algo:
        specs = [s for s in specs if s.variant in args.algo]
    if args.w:
        specs = [s for s in specs if s.variant != "prox" or s.weights == args.w]
    report = run_experiment(models, specs, args.out)
    print(report.summary.to_string(index=False))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "gen": cmd_gen, "convert": cmd_convert, "bench": cmd_bench}


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except (UsageError, OSError) as e:
        print(e, file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ResourceCapError as e:
        print(f"resource cap: {e}", file=sys.stderr)
        return EXIT_CAP
    except (MeuError, ValidationError, UsageError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
