from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import IO, Literal

from reformine.domain.ast import DOMAIN_TYPES, EXPR_TYPES, Node, SpecAst, node_at
from reformine.domain.errors import ReformineError
from reformine.domain.models import (
    CommandOutcome,
    ExploreConfig,
    GeneratorConfig,
    Instance,
    MatchView,
    SolveSettings,
)
from reformine.services.features import distance_matrix_csv, feature_rows_csv, featurize, pairwise
from reformine.services.flatten import flatten, resolve_flatten_cap
from reformine.services.graph_ir import export, from_graph, parse_graph_json, to_graph
from reformine.services.grounding import ground
from reformine.services.instance_generator import sample_instances
from reformine.services.instance_store import InstanceStoreService
from reformine.services.mcts import explore, export_tree_dot
from reformine.services.rewrite_engine import apply_traced, enumerate_matches, get_rule, normalize, rule_library
from reformine.services.solver import solve
from reformine.services.spec_parser import parse_spec
from reformine.services.spec_printer import pretty, pretty_domain, pretty_expr
from reformine.services.trace_log import TraceLogService
from reformine.version import APP_NAME, __version__


LOG = logging.getLogger(__name__)

ColorMode = Literal["auto", "always", "never"]
COLOR_MODES: tuple[ColorMode, ...] = ("auto", "always", "never")
DEFAULT_COLOR: ColorMode = "auto"


class _ParserExit(Exception):
    def __init__(self, status: int, stdout: str = "", stderr: str = "") -> None:
        super().__init__(stderr or stdout)
        self.status = status
        self.stdout = stdout
        self.stderr = stderr


class _CliParser(argparse.ArgumentParser):
    """Argument parser that reports help and usage errors instead of exiting."""

    def print_help(self, file: IO[str] | None = None) -> None:
        raise _ParserExit(0, stdout=self.format_help())

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _ParserExit(2, stderr=f"{self.format_usage()}{self.prog}: error: {message}\n")

    def exit(self, status: int = 0, message: str | None = None) -> None:  # type: ignore[override]
        raise _ParserExit(status, stderr=message or "")


def _normalize_color(raw: object) -> ColorMode | None:
    if raw is None:
        return None
    text = str(raw).strip().lower()
    return text if text in COLOR_MODES else None  # type: ignore[return-value]


def resolve_color(cli: str | None = None, env: str | None = None, *, isatty: bool = False) -> bool:
    """Whether diagnostics are colored; the flag wins over ``REFORMINE_COLOR``."""
    mode = DEFAULT_COLOR
    for candidate in (cli, env):
        normalized = _normalize_color(candidate)
        if normalized is not None:
            mode = normalized
            break
    if mode == "auto":
        return isatty
    return mode == "always"


def _diagnostic(exc: ReformineError, *, color: bool) -> str:
    label = "\x1b[31merror\x1b[0m" if color else "error"
    where = exc.location()
    prefix = f"{where}: " if where else ""
    return f"{prefix}{label}: {exc.message}\n"


def _configure_logging(verbose: bool) -> None:
    logger = logging.getLogger("reformine")
    if not any(getattr(handler, "_reformine", False) for handler in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        handler._reformine = True  # type: ignore[attr-defined]
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ReformineError(f"cannot read file: {exc.strerror}", source=str(path)) from exc


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReformineError(f"cannot write file: {exc.strerror}", source=str(path)) from exc


def load_spec(path: Path) -> SpecAst:
    """A specification from Emini text, or from a GraphDoc when the file ends in ``.json``."""
    text = _read(path)
    if path.suffix == ".json":
        return from_graph(parse_graph_json(text, source=str(path)))
    return parse_spec(text, source=str(path))


def _describe(node: Node) -> str:
    if isinstance(node, EXPR_TYPES):
        return pretty_expr(node)
    if isinstance(node, DOMAIN_TYPES):
        return pretty_domain(node)
    return node.token


def _terminated(text: str) -> str:
    return text if text.endswith("\n") else text + "\n"


# subcommands


def _cmd_fmt(args: argparse.Namespace) -> str:
    return pretty(load_spec(args.spec), annotated=args.annotate)


def _cmd_graph(args: argparse.Namespace) -> str:
    return _terminated(export(to_graph(load_spec(args.spec)), args.format).rstrip("\n"))


def _cmd_rewrite(args: argparse.Namespace) -> str:
    ast = load_spec(args.spec)
    if args.normalize:
        return pretty(normalize(ast))
    if args.index is not None:
        if args.rule is None:
            raise ReformineError("--index needs --rule")
        rule = get_rule(args.rule)
        matches = enumerate_matches(rule, ast)
        if not 0 <= args.index < len(matches):
            raise ReformineError(
                f"rule {rule.name} has {len(matches)} match(es); index {args.index} is out of range",
                source=str(args.spec),
            )
        rewritten, record = apply_traced(rule, ast, matches[args.index])
        if args.trace is not None:
            TraceLogService(args.trace).log_trace(record, spec=str(args.spec))
        return pretty(rewritten)
    rules = rule_library(None if args.rule is None else [args.rule])
    views = [
        MatchView(rule=rule.name, index=index, path=list(match.path), node=_describe(node_at(ast, match.path)))
        for rule in rules
        for index, match in enumerate(enumerate_matches(rule, ast))
    ]
    return json.dumps([view.model_dump() for view in views], indent=2) + "\n"


def _cmd_solve(args: argparse.Namespace) -> str:
    ast = load_spec(args.spec)
    instance = InstanceStoreService().load(args.instance) if args.instance is not None else Instance()
    mode = "all" if args.all else "optimize" if args.optimize else "first"
    settings = SolveSettings(mode=mode, budget=args.budget, flatten_cap=resolve_flatten_cap(args.flatten_cap))
    grounded = ground(ast, instance, source=str(args.spec))
    csp = flatten(grounded, cap=settings.flatten_cap)
    result = solve(csp, settings.budget, settings.mode)
    return result.model_dump_json(indent=2) + "\n"


def _parse_range(text: str) -> tuple[str, tuple[int, int]]:
    name, _, bounds = text.partition("=")
    lo, _, hi = bounds.partition(":")
    try:
        return name.strip(), (int(lo), int(hi))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected NAME=LO:HI, got '{text}'") from exc


def _cmd_gen(args: argparse.Namespace) -> str:
    ast = load_spec(args.spec)
    config = GeneratorConfig(
        count=args.count,
        seed=args.seed,
        density=args.density,
        cap=args.cap,
        ranges=dict(args.range or []),
        max_rejections=args.max_rejections,
    )
    instances = sample_instances(ast, config, prefix=args.prefix)
    store = InstanceStoreService()
    if args.out is not None:
        written = store.write_instances(instances, args.out, args.format)
        return "".join(f"{path}\n" for path in written)
    if args.format == "json":
        payload = [
            {"name": instance.name, "bindings": json.loads(store.dump(instance, "json"))}
            for instance in instances
        ]
        return json.dumps(payload, indent=2) + "\n"
    return "".join(f"$ {instance.name}\n{store.dump(instance, 'param')}" for instance in instances)


def _cmd_explore(args: argparse.Namespace) -> str:
    ast = load_spec(args.spec)
    config = ExploreConfig(
        iterations=args.iters,
        seed=args.seed,
        budget=args.budget,
        uct_c=args.c,
        max_depth=args.depth,
        jobs=args.jobs,
        rules=args.rules,
        instances=InstanceStoreService().load_directory(args.instances),
        flatten_cap=resolve_flatten_cap(args.flatten_cap),
    )
    trace_log = TraceLogService(args.trace) if args.trace is not None else None
    report = explore(ast, config, trace_log=trace_log)
    text = report.model_dump_json(indent=2) + "\n"
    if args.report is not None:
        _write(args.report, text)
    if args.tree_dot is not None:
        _write(args.tree_dot, export_tree_dot(report))
    return text


def _cmd_features(args: argparse.Namespace) -> str:
    rows = [(str(path), featurize(load_spec(path))) for path in args.specs]
    if args.pairwise:
        return distance_matrix_csv([name for name, _ in rows], pairwise([vector for _, vector in rows]))
    return feature_rows_csv(rows)


def _rule_list(text: str) -> list[str]:
    return [name.strip() for name in text.split(",") if name.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _CliParser(prog=APP_NAME, description="Exploratory reformulation of Emini specifications.")
    parser.add_argument("--version", action="store_true", help="print the version and exit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument("--color", choices=COLOR_MODES, default=None, help="color diagnostics (overrides REFORMINE_COLOR)")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    fmt = commands.add_parser("fmt", help="pretty-print a specification")
    fmt.add_argument("spec", type=Path)
    fmt.add_argument("--annotate", action="store_true", help="print the annotated syntax tree")
    fmt.set_defaults(handler=_cmd_fmt)

    graph = commands.add_parser("graph", help="export the syntax tree as a graph")
    graph.add_argument("spec", type=Path)
    graph.add_argument("--format", choices=("gp2", "dot", "json"), default="json")
    graph.set_defaults(handler=_cmd_graph)

    rewrite = commands.add_parser("rewrite", help="list or apply rewrite rule matches")
    rewrite.add_argument("spec", type=Path)
    rewrite.add_argument("--rule", default=None)
    action = rewrite.add_mutually_exclusive_group()
    action.add_argument("--list", action="store_true", help="list matches as JSON (default)")
    action.add_argument("--index", type=int, default=None, help="apply the match with this index")
    action.add_argument("--normalize", action="store_true", help="print the normal form")
    rewrite.add_argument("--trace", type=Path, default=None, help="append a JSON-lines trace record")
    rewrite.set_defaults(handler=_cmd_rewrite)

    solve_cmd = commands.add_parser("solve", help="ground, flatten and solve")
    solve_cmd.add_argument("spec", type=Path)
    solve_cmd.add_argument("--instance", type=Path, default=None)
    mode = solve_cmd.add_mutually_exclusive_group()
    mode.add_argument("--all", action="store_true", help="enumerate every solution")
    mode.add_argument("--optimize", action="store_true", help="branch and bound on the objective")
    solve_cmd.add_argument("--budget", type=int, default=100_000)
    solve_cmd.add_argument("--flatten-cap", type=int, default=None)
    solve_cmd.set_defaults(handler=_cmd_solve)

    gen = commands.add_parser("gen", help="sample instances by rejection sampling")
    gen.add_argument("spec", type=Path)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--density", type=float, default=0.5)
    gen.add_argument("--cap", type=int, default=50)
    gen.add_argument("--range", type=_parse_range, action="append", metavar="NAME=LO:HI")
    gen.add_argument("--max-rejections", type=int, default=1000)
    gen.add_argument("--prefix", default="instance")
    gen.add_argument("--out", type=Path, default=None)
    gen.add_argument("--format", choices=("param", "json"), default="param")
    gen.set_defaults(handler=_cmd_gen)

    explore_cmd = commands.add_parser("explore", help="search rewrite sequences with MCTS")
    explore_cmd.add_argument("spec", type=Path)
    explore_cmd.add_argument("--instances", type=Path, required=True)
    explore_cmd.add_argument("--iters", type=int, required=True)
    explore_cmd.add_argument("--seed", type=int, required=True)
    explore_cmd.add_argument("--budget", type=int, default=100_000)
    explore_cmd.add_argument("--c", type=float, default=ExploreConfig().uct_c)
    explore_cmd.add_argument("--depth", type=int, default=8)
    explore_cmd.add_argument("--jobs", type=int, default=1)
    explore_cmd.add_argument("--rules", type=_rule_list, default=None)
    explore_cmd.add_argument("--flatten-cap", type=int, default=None)
    explore_cmd.add_argument("--report", type=Path, default=None)
    explore_cmd.add_argument("--tree-dot", type=Path, default=None)
    explore_cmd.add_argument("--trace", type=Path, default=None)
    explore_cmd.set_defaults(handler=_cmd_explore)

    features = commands.add_parser("features", help="structural feature vectors as CSV")
    features.add_argument("specs", type=Path, nargs="+")
    features.add_argument("--pairwise", action="store_true", help="emit the distance matrix instead")
    features.set_defaults(handler=_cmd_features)
    return parser


def run(argv: Sequence[str] | None = None, *, isatty: bool = False) -> CommandOutcome:
    parser = build_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
    except _ParserExit as exc:
        return CommandOutcome(exit_code=exc.status, stdout=exc.stdout, stderr=exc.stderr)
    if args.version:
        return CommandOutcome(stdout=f"{APP_NAME} {__version__}\n")
    if args.command is None:
        return CommandOutcome(exit_code=2, stderr=f"{parser.format_usage()}{parser.prog}: error: a command is required\n")
    _configure_logging(args.verbose)
    color = resolve_color(args.color, os.getenv("REFORMINE_COLOR"), isatty=isatty)
    handler: Callable[[argparse.Namespace], str] = args.handler
    try:
        return CommandOutcome(stdout=handler(args))
    except ReformineError as exc:
        LOG.debug("%s failed", args.command, exc_info=True)
        return CommandOutcome(exit_code=1, stderr=_diagnostic(exc, color=color))
    except ValueError as exc:
        # pydantic settings validation and out-of-range numeric flags
        return CommandOutcome(exit_code=2, stderr=f"{parser.prog} {args.command}: error: {exc}\n")


def main(argv: Sequence[str] | None = None) -> int:
    outcome = run(argv, isatty=sys.stderr.isatty())
    if outcome.stdout:
        sys.stdout.write(outcome.stdout)
    if outcome.stderr:
        sys.stderr.write(outcome.stderr)
    return outcome.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
