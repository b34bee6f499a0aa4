"""Command-line front end: ``chorex extract | check | simulate``."""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional, Sequence, Tuple

from .equiv import CounterexampleFound, check_bisimulation
from .model import Then
from .seg import POLICIES, ExtractionFailure, choose_group, export_dot, node_budget_from_env
from .semantics import ChorState, NetworkState, enabled_network_transitions
from .synth import extract
from .syntax import ParseError, parse_choreography, parse_network, print_choreography, print_network

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_DEADLOCK = 2
EXIT_LEAK = 3
EXIT_NO_LOOP = 4
EXIT_COUNTEREXAMPLE = 5
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default, which is taken
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from None


def load_topology(path: str) -> List[Tuple[str, str]]:
    """One ``p -- q`` pair per line; blank lines and ``#`` or ``//`` comments are skipped."""
    pairs = []
    for lineno, raw in enumerate(_read(path).splitlines(), 1):
        line = raw.split("#", 1)[0].split("//", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("--")]
        if len(parts) != 2 or not all(parts):
            raise UsageError(f"{path}:{lineno}: expected 'p -- q', found {raw.strip()!r}")
        pairs.append((parts[0], parts[1]))
    return pairs


def _budget(flag: Optional[int]) -> int:
    if flag is not None:
        if flag < 1:
            raise UsageError("--node-budget must be positive")
        return flag
    try:
        return node_budget_from_env()
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_names(network, topology) -> None:
    if topology is None:
        return
    known = set(network.names)
    for p, q in topology:
        for name in (p, q):
            if name not in known:
                raise UsageError(f"topology names unknown process {name!r}")


def cmd_extract(args) -> int:
    network = parse_network(_read(args.input), args.input)
    topology = load_topology(args.topology) if args.topology else None
    _check_names(network, topology)
    try:
        chor, seg = extract(network, topology, policy=args.seed_policy, node_budget=_budget(args.node_budget))
    except ExtractionFailure as failure:
        print(f"error: {failure}", file=sys.stderr)
        return failure.exit_code
    _write(args.output, print_choreography(chor) + "\n")
    if args.dot:
        _write(args.dot, export_dot(seg))
    if args.check:
        verdict = check_bisimulation(
            NetworkState.initial(network, topology),
            ChorState.initial(chor, network.names, topology),
            args.depth,
        )
        print(f"check: {verdict}", file=sys.stderr)
        if isinstance(verdict, CounterexampleFound):
            return EXIT_COUNTEREXAMPLE
    return EXIT_OK


def cmd_check(args) -> int:
    network = parse_network(_read(args.net), args.net)
    chor = parse_choreography(_read(args.chor), args.chor)
    topology = load_topology(args.topology) if args.topology else None
    _check_names(network, topology)
    verdict = check_bisimulation(
        NetworkState.initial(network, topology),
        ChorState.initial(chor, network.names, topology),
        args.depth,
    )
    if isinstance(verdict, CounterexampleFound):
        print(f"counterexample ({verdict.side} side):")
        for label in verdict.trace:
            print(f"    {label}")
        return EXIT_COUNTEREXAMPLE
    print(verdict)
    return EXIT_OK


def cmd_simulate(args) -> int:
    network = parse_network(_read(args.input), args.input)
    state = NetworkState.initial(network)
    take_then = True
    for _ in range(args.steps):
        if state.network.is_terminated:
            break
        transitions = enabled_network_transitions(state, strict=False)
        if not transitions:
            print(print_network(state.network))
            print("error: deadlock: no transition is enabled", file=sys.stderr)
            return EXIT_DEADLOCK
        group = choose_group(transitions, frozenset(), args.policy)
        if len(group) == 2:
            label, state = next(t for t in group if isinstance(t[0], Then) == take_then)
            if args.alternate:
                take_then = not take_then
        else:
            label, state = group[0]
        print(label)
    print()
    print(print_network(state.network))
    return EXIT_OK


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chorex", description="Extract choreographies from process networks with spawning.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="extract a choreography from a .net file")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="write the choreography here instead of stdout")
    p.add_argument("--dot", help="also write the symbolic execution graph as DOT")
    p.add_argument("--topology", help="initial connections, one 'p -- q' per line (default: complete)")
    p.add_argument("--check", action="store_true", help="validate the result with the bisimulation oracle")
    p.add_argument("--depth", type=_positive, default=12, help="oracle depth for --check (default 12)")
    p.add_argument("--seed-policy", choices=POLICIES, default="lex", help="scheduling policy (default lex)")
    p.add_argument("--node-budget", type=int, help="maximum SEG size (default $CHOREX_NODE_BUDGET or 100000)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("check", help="bounded bisimulation check of a network against a choreography")
    p.add_argument("net")
    p.add_argument("chor")
    p.add_argument("--depth", type=_positive, default=12)
    p.add_argument("--topology")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="run a network and print the labels it produces")
    p.add_argument("input")
    p.add_argument("--steps", type=_positive, default=10)
    p.add_argument("--policy", choices=POLICIES, default="lex")
    p.add_argument("--alternate", action="store_true", help="alternate then/else instead of always taking then")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"chorex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
