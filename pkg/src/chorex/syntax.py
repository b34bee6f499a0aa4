"""Concrete ASCII syntax for networks (``.net``) and choreographies (``.chor``).

Hand-written tokenizer and recursive-descent parser, plus a canonical
pretty-printer such that ``parse(print(ast)) == ast``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Set, Tuple

from .model import (
    CCall,
    CCom,
    CCond,
    CIntro,
    CSel,
    CSpawn,
    CTerminated,
    Behaviour,
    Call,
    ChorBody,
    ChorProcedure,
    Choreography,
    Conditional,
    Introduce,
    Network,
    Offer,
    ProcedureDef,
    Process,
    Receive,
    ReceiveIntro,
    Select,
    Send,
    Spawn,
    Terminated,
    distinct_binders,
    free_names,
)

KEYWORDS = frozenset({"def", "main", "if", "then", "else", "spawn", "with", "continue", "stop", "spawns"})

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<name>[A-Za-z_](?:[A-Za-z0-9_]|/(?!/))*)
  | (?P<number>[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<sym><->|->|[{}()\[\];,:!?+&.|])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(Exception):
    def __init__(self, span: SourceSpan, expected: str, found: str):
        self.span = span
        self.expected = expected
        self.found = found
        super().__init__(f"{span}: expected {expected}, found {found}")


@dataclass(frozen=True)
class Token:
    kind: str  # name | number | string | sym | eof
    text: str
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return repr(self.text)


def tokenize(src: str, file: str = "<input>") -> List[Token]:
    tokens: List[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(SourceSpan(file, line, col), "a token", repr(src[pos]))
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append(Token(kind, text, line, col))
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, src: str, file: str):
        self.file = file
        self.toks = tokenize(src, file)
        self.i = 0

    # -- helpers -----------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, expected: str, tok: Optional[Token] = None, found: Optional[str] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(
            SourceSpan(self.file, tok.line, tok.column), expected, found if found is not None else tok.describe()
        )

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "name") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(repr(text))
        tok = self.tok
        self.i += 1
        return tok

    def name(self, what: str = "a name") -> str:
        tok = self.tok
        if tok.kind != "name" or tok.text in KEYWORDS:
            raise self.error(what)
        self.i += 1
        return tok.text

    def expr(self) -> str:
        tok = self.tok
        if tok.kind in ("name", "number", "string") and tok.text not in KEYWORDS:
            self.i += 1
            return tok.text
        raise self.error("an expression")

    def namelist(self) -> Tuple[str, ...]:
        self.expect("(")
        out: List[str] = []
        if not self.at(")"):
            out.append(self.name())
            while self.at(","):
                self.i += 1
                out.append(self.name())
        self.expect(")")
        return tuple(out)

    def end(self) -> None:
        if self.tok.kind != "eof":
            raise self.error("end of input")

    def is_terminator(self) -> bool:
        return (self.tok.kind == "number" and self.tok.text == "0") or self.at("stop")

    def tail_call_check(self) -> None:
        if self.at(";"):
            raise self.error("end of behaviour (procedure calls are only allowed in tail position)")

    # -- networks ----------------------------------------------------------

    def network(self) -> Network:
        procs = [self.process()]
        while self.at("|"):
            self.i += 1
            procs.append(self.process())
        self.end()
        seen: Set[str] = set()
        for tok_index, proc in procs:
            if proc.name in seen:
                raise self.error(f"a process name distinct from {proc.name!r}", self.toks[tok_index])
            seen.add(proc.name)
        network = Network.of(p for _, p in procs)
        for tok_index, proc in procs:
            self.check_process(proc, seen, self.toks[tok_index])
        return network

    def process(self):
        start = self.i
        name = self.name("a process name")
        self.expect("{")
        procedures: List[ProcedureDef] = []
        while self.at("def"):
            def_tok = self.tok
            self.i += 1
            pname = self.name("a procedure name")
            params = self.namelist()
            if len(set(params)) != len(params):
                raise self.error("pairwise distinct parameters", def_tok)
            self.expect("{")
            body = self.behaviour()
            self.expect("}")
            if any(d.name == pname for d in procedures):
                raise self.error(f"a procedure name distinct from {pname!r}", def_tok)
            procedures.append(ProcedureDef(pname, params, distinct_binders(body)))
        if not self.at("main"):
            raise self.error("'def' or 'main'")
        self.i += 1
        self.expect("{")
        main = self.behaviour()
        self.expect("}")
        self.expect("}")
        return start, Process(name, tuple(procedures), distinct_binders(main))

    def check_process(self, proc: Process, globals_: Set[str], tok: Token) -> None:
        arities = {d.name: len(d.params) for d in proc.procedures}

        def calls(b: Behaviour):
            if isinstance(b, Call):
                yield b
            for sub in _children(b):
                yield from calls(sub)

        bodies = [(d.body, set(d.params)) for d in proc.procedures] + [(proc.main, set())]
        for body, params in bodies:
            for c in calls(body):
                if c.procedure not in arities:
                    raise self.error(f"a procedure defined in {proc.name!r}", tok, repr(c.procedure))
                if arities[c.procedure] != len(c.args):
                    raise self.error(
                        f"{arities[c.procedure]} argument(s) for {c.procedure!r}", tok, str(len(c.args))
                    )
            for n in sorted(free_names(body)):
                if n not in params and n not in globals_:
                    raise self.error("a known process name or parameter", tok, repr(n))

    def behaviour(self) -> Behaviour:
        tok = self.tok
        if self.is_terminator():
            self.i += 1
            return Terminated()
        if self.at("if"):
            self.i += 1
            e = self.expr()
            self.expect("then")
            self.expect("{")
            b1 = self.behaviour()
            self.expect("}")
            self.expect("else")
            self.expect("{")
            b2 = self.behaviour()
            self.expect("}")
            return Conditional(e, b1, b2)
        if self.at("spawn"):
            self.i += 1
            q = self.name("a process variable")
            self.expect("with")
            self.expect("{")
            child = self.behaviour()
            self.expect("}")
            self.expect("continue")
            self.expect("{")
            cont = self.behaviour()
            self.expect("}")
            return Spawn(q, child, cont)
        if tok.kind != "name" or tok.text in KEYWORDS:
            raise self.error("a behaviour")
        p = self.name()
        if self.at("("):
            args = self.namelist()
            self.tail_call_check()
            return Call(p, args)
        if self.at("!"):
            self.i += 1
            e = self.expr()
            self.expect(";")
            return Send(p, e, self.behaviour())
        if self.at("?"):
            self.i += 1
            if self.at(";"):
                self.i += 1
                return Receive(p, self.behaviour())
            t = self.name("';' or a process variable")
            self.expect(";")
            return ReceiveIntro(p, t, self.behaviour())
        if self.at("+"):
            self.i += 1
            label = self.name("a label")
            self.expect(";")
            return Select(p, label, self.behaviour())
        if self.at("&"):
            self.i += 1
            self.expect("{")
            branches: List[Tuple[str, Behaviour]] = []
            while True:
                ltok = self.tok
                label = self.name("a label")
                if any(label == l for l, _ in branches):
                    raise self.error(f"a label distinct from {label!r}", ltok)
                self.expect(":")
                branches.append((label, self.behaviour()))
                if not self.at(","):
                    break
                self.i += 1
            self.expect("}")
            return Offer(p, tuple(branches))
        if self.at("<->"):
            self.i += 1
            r = self.name()
            self.expect(";")
            return Introduce(p, r, self.behaviour())
        raise self.error("'(', '!', '?', '+', '&' or '<->'")

    # -- choreographies ----------------------------------------------------

    def choreography(self) -> Choreography:
        procedures: List[ChorProcedure] = []
        while self.at("def"):
            def_tok = self.tok
            self.i += 1
            name = self.name("a procedure name")
            params = self.namelist()
            if len(set(params)) != len(params):
                raise self.error("pairwise distinct parameters", def_tok)
            self.expect("{")
            body = self.cbody()
            self.expect("}")
            if any(d.name == name for d in procedures):
                raise self.error(f"a procedure name distinct from {name!r}", def_tok)
            procedures.append(ChorProcedure(name, params, body))
        if not self.at("main"):
            raise self.error("'def' or 'main'")
        self.i += 1
        self.expect("{")
        main = self.cbody()
        self.expect("}")
        self.end()
        return Choreography(tuple(procedures), main)

    def cbody(self) -> ChorBody:
        if self.is_terminator():
            self.i += 1
            return CTerminated()
        if self.at("if"):
            self.i += 1
            p = self.name()
            self.expect(".")
            e = self.expr()
            self.expect("then")
            self.expect("{")
            c1 = self.cbody()
            self.expect("}")
            self.expect("else")
            self.expect("{")
            c2 = self.cbody()
            self.expect("}")
            return CCond(p, e, c1, c2)
        if self.tok.kind != "name" or self.tok.text in KEYWORDS:
            raise self.error("a choreography body")
        p = self.name()
        if self.at("("):
            args = self.namelist()
            self.tail_call_check()
            return CCall(p, args)
        if self.at("spawns"):
            self.i += 1
            q = self.name()
            self.expect(";")
            return CSpawn(p, q, self.cbody())
        if self.at("->"):
            self.i += 1
            q = self.name()
            self.expect("[")
            label = self.name("a label")
            self.expect("]")
            self.expect(";")
            return CSel(p, q, label, self.cbody())
        if self.at("."):
            self.i += 1
            etok = self.tok
            e = self.expr()
            if self.at("<->"):
                if etok.kind != "name":
                    raise self.error("a process name", etok)
                self.i += 1
                r = self.name()
                self.expect(";")
                return CIntro(p, e, r, self.cbody())
            self.expect("->")
            q = self.name()
            self.expect(";")
            return CCom(p, e, q, self.cbody())
        raise self.error("'(', '.', '->' or 'spawns'")


def _children(b: Behaviour):
    if isinstance(b, (Send, Receive, Select, Introduce, ReceiveIntro)):
        return (b.cont,)
    if isinstance(b, Offer):
        return tuple(x for _, x in b.branches)
    if isinstance(b, Conditional):
        return (b.then, b.else_)
    if isinstance(b, Spawn):
        return (b.child, b.cont)
    return ()


def parse_network(src: str, file: str = "<input>") -> Network:
    return _Parser(src, file).network()


def parse_choreography(src: str, file: str = "<input>") -> Choreography:
    return _Parser(src, file).choreography()


def parse_behaviour(src: str, file: str = "<input>") -> Behaviour:
    """A single behaviour, with binders made distinct as in a process body."""
    parser = _Parser(src, file)
    b = parser.behaviour()
    parser.end()
    return distinct_binders(b)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

INDENT = "    "


def _fmt_args(args) -> str:
    return "(" + ", ".join(args) + ")"


def behaviour_lines(b: Behaviour, depth: int = 0) -> List[str]:
    pad = INDENT * depth
    if isinstance(b, Terminated):
        return [pad + "0"]
    if isinstance(b, Call):
        return [pad + b.procedure + _fmt_args(b.args)]
    if isinstance(b, Send):
        return [f"{pad}{b.to}!{b.expr};"] + behaviour_lines(b.cont, depth)
    if isinstance(b, Receive):
        return [f"{pad}{b.frm}?;"] + behaviour_lines(b.cont, depth)
    if isinstance(b, ReceiveIntro):
        return [f"{pad}{b.frm}?{b.binder};"] + behaviour_lines(b.cont, depth)
    if isinstance(b, Select):
        return [f"{pad}{b.to}+{b.label};"] + behaviour_lines(b.cont, depth)
    if isinstance(b, Introduce):
        return [f"{pad}{b.left} <-> {b.right};"] + behaviour_lines(b.cont, depth)
    if isinstance(b, Offer):
        lines = [f"{pad}{b.frm}&{{"]
        for i, (label, body) in enumerate(b.branches):
            lines.append(f"{pad}{INDENT}{label}:")
            sub = behaviour_lines(body, depth + 2)
            if i < len(b.branches) - 1:
                sub[-1] += ","
            lines.extend(sub)
        lines.append(pad + "}")
        return lines
    if isinstance(b, Conditional):
        return (
            [f"{pad}if {b.expr} then {{"]
            + behaviour_lines(b.then, depth + 1)
            + [pad + "} else {"]
            + behaviour_lines(b.else_, depth + 1)
            + [pad + "}"]
        )
    if isinstance(b, Spawn):
        return (
            [f"{pad}spawn {b.binder} with {{"]
            + behaviour_lines(b.child, depth + 1)
            + [pad + "} continue {"]
            + behaviour_lines(b.cont, depth + 1)
            + [pad + "}"]
        )
    raise TypeError(f"not a behaviour: {b!r}")


def print_behaviour(b: Behaviour) -> str:
    return "\n".join(behaviour_lines(b))


def compact_behaviour(b: Behaviour) -> str:
    """Single-line rendering, used for graph labels and diagnostics."""
    return " ".join(line.strip() for line in behaviour_lines(b))


def print_network(n: Network) -> str:
    blocks = []
    for proc in n.processes:
        lines = [f"{proc.name} {{"]
        for d in proc.procedures:
            lines.append(f"{INDENT}def {d.name}{_fmt_args(d.params)} {{")
            lines.extend(behaviour_lines(d.body, 2))
            lines.append(INDENT + "}")
        lines.append(INDENT + "main {")
        lines.extend(behaviour_lines(proc.main, 2))
        lines.append(INDENT + "}")
        lines.append("}")
        blocks.append("\n".join(lines))
    return " |\n".join(blocks) + "\n"


def chor_lines(c: ChorBody, depth: int = 0) -> List[str]:
    pad = INDENT * depth
    if isinstance(c, CTerminated):
        return [pad + "0"]
    if isinstance(c, CCall):
        return [pad + c.procedure + _fmt_args(c.args)]
    if isinstance(c, CCom):
        return [f"{pad}{c.sender}.{c.expr} -> {c.receiver};"] + chor_lines(c.cont, depth)
    if isinstance(c, CSel):
        return [f"{pad}{c.sender} -> {c.receiver}[{c.label}];"] + chor_lines(c.cont, depth)
    if isinstance(c, CSpawn):
        return [f"{pad}{c.parent} spawns {c.child};"] + chor_lines(c.cont, depth)
    if isinstance(c, CIntro):
        return [f"{pad}{c.introducer}.{c.left} <-> {c.right};"] + chor_lines(c.cont, depth)
    if isinstance(c, CCond):
        return (
            [f"{pad}if {c.process}.{c.expr} then {{"]
            + chor_lines(c.then, depth + 1)
            + [pad + "} else {"]
            + chor_lines(c.else_, depth + 1)
            + [pad + "}"]
        )
    raise TypeError(f"not a choreography body: {c!r}")


def print_chor_body(c: ChorBody) -> str:
    return "\n".join(chor_lines(c))


def print_choreography(c: Choreography) -> str:
    lines: List[str] = []
    for d in c.procedures:
        lines.append(f"def {d.name}{_fmt_args(d.params)} {{")
        lines.extend(chor_lines(d.body, 1))
        lines.append("}")
    lines.append("main {")
    lines.extend(chor_lines(c.main, 1))
    lines.append("}")
    return "\n".join(lines) + "\n"
