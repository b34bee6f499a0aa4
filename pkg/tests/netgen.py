"""Random extractable networks, obtained by projecting random choreographies.

Every generated choreography is well-formed by construction:
- each conditional starts both branches by selecting a branch label at every
  other process, so the projections of the branches can be merged;
- every loop body involves every process before it recurses;
- spawning only happens through a fixed gadget in which the parent spawns a
  worker, introduces it to another process, and the worker receives one
  message from that process and terminates.
"""

from __future__ import annotations

import random
from typing import List, Sequence, Tuple

from chorex.model import (
    Call,
    CCall,
    CCom,
    CCond,
    CIntro,
    CSel,
    CSpawn,
    CTerminated,
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
)

NAMES = ("p", "q", "r", "s")
EXPRS = ("x", "y", "z")


class NotProjectable(Exception):
    pass


class _Gen:
    def __init__(self, rng: random.Random, names: Sequence[str], spawn_rate: float):
        self.rng = rng
        self.names = list(names)
        self.spawn_rate = spawn_rate
        self.workers = 0
        self.conds = 0

    def pair(self) -> Tuple[str, str]:
        a, b = self.rng.sample(self.names, 2)
        return a, b

    def atom(self, rest: ChorBody) -> ChorBody:
        roll = self.rng.random()
        a, b = self.pair()
        if roll < self.spawn_rate:
            self.workers += 1
            w = f"w{self.workers}"
            return CSpawn(a, w, CIntro(a, w, b, CCom(b, "m", w, rest)))
        if roll < 0.75:
            return CCom(a, self.rng.choice(EXPRS), b, rest)
        return CSel(a, b, self.rng.choice(("ok", "go")), rest)

    def sequence(self, tail: ChorBody, cover: bool) -> ChorBody:
        """A few random actions before ``tail``; with ``cover`` every process takes part."""
        body = tail
        atoms = []
        for _ in range(self.rng.randint(1, 3)):
            atoms.append(self.atom(CTerminated()))
        if cover:
            order = self.names[:]
            self.rng.shuffle(order)
            for a, b in zip(order, order[1:]):
                atoms.append(CCom(a, self.rng.choice(EXPRS), b, CTerminated()))
        for atom in reversed(atoms):
            body = _replace_tail(atom, body)
        return body

    def selections(self, p: str, label: str, rest: ChorBody) -> ChorBody:
        for other in sorted(set(self.names) - {p}, reverse=True):
            rest = CSel(p, other, label, rest)
        return rest

    def branching(self, then_tail: ChorBody, else_tail: ChorBody, cover: bool) -> ChorBody:
        self.conds += 1
        p = self.rng.choice(self.names)
        e = f"c{self.conds}"
        then = self.selections(p, "L", self.sequence(then_tail, False) if self.rng.random() < 0.5 else then_tail)
        else_ = self.selections(p, "R", self.sequence(else_tail, False) if self.rng.random() < 0.5 else else_tail)
        return self.sequence(CCond(p, e, then, else_), cover) if cover else CCond(p, e, then, else_)


def _replace_tail(atom: ChorBody, tail: ChorBody) -> ChorBody:
    if isinstance(atom, CTerminated):
        return tail
    if isinstance(atom, CCom):
        return CCom(atom.sender, atom.expr, atom.receiver, _replace_tail(atom.cont, tail))
    if isinstance(atom, CSel):
        return CSel(atom.sender, atom.receiver, atom.label, _replace_tail(atom.cont, tail))
    if isinstance(atom, CIntro):
        return CIntro(atom.introducer, atom.left, atom.right, _replace_tail(atom.cont, tail))
    if isinstance(atom, CSpawn):
        return CSpawn(atom.parent, atom.child, _replace_tail(atom.cont, tail))
    raise TypeError(atom)


def random_choreography(rng: random.Random, n_procs: int = 3, spawn_rate: float = 0.2) -> Choreography:
    names = NAMES[:n_procs]
    g = _Gen(rng, names, spawn_rate)
    shape = rng.choice(("straight", "branch", "loop", "loop-exit", "two-loops"))
    procedures: List[ChorProcedure] = []
    if shape == "straight":
        main = g.sequence(CTerminated(), False)
    elif shape == "branch":
        main = g.sequence(g.branching(CTerminated(), CTerminated(), False), False)
    elif shape == "loop":
        procedures.append(ChorProcedure("X", (), g.sequence(CCall("X"), True)))
        main = g.sequence(CCall("X"), False)
    elif shape == "loop-exit":
        procedures.append(ChorProcedure("X", (), g.branching(CCall("X"), CTerminated(), True)))
        main = CCall("X") if rng.random() < 0.5 else g.sequence(CCall("X"), False)
    else:
        procedures.append(ChorProcedure("Y", (), g.branching(CCall("Y"), CTerminated(), True)))
        procedures.append(ChorProcedure("X", (), g.branching(CCall("X"), CCall("Y"), True)))
        main = CCall("X")
    return Choreography(tuple(procedures), main)


# ---------------------------------------------------------------------------
# Endpoint projection
# ---------------------------------------------------------------------------


def _merge(a, b):
    if a == b:
        return a
    if isinstance(a, Offer) and isinstance(b, Offer) and a.frm == b.frm:
        labels = {lbl for lbl, _ in a.branches}
        if labels & {lbl for lbl, _ in b.branches}:
            raise NotProjectable("overlapping offers")
        return Offer(a.frm, a.branches + b.branches)
    raise NotProjectable(f"cannot merge {a} and {b}")


def project_body(c: ChorBody, r: str):
    if isinstance(c, CTerminated):
        return Terminated()
    if isinstance(c, CCall):
        return Call(c.procedure, c.args)
    if isinstance(c, CCom):
        rest = project_body(c.cont, r)
        if r == c.sender:
            return Send(c.receiver, c.expr, rest)
        if r == c.receiver:
            return Receive(c.sender, rest)
        return rest
    if isinstance(c, CSel):
        rest = project_body(c.cont, r)
        if r == c.sender:
            return Select(c.receiver, c.label, rest)
        if r == c.receiver:
            return Offer(c.sender, ((c.label, rest),))
        return rest
    if isinstance(c, CCond):
        t, e = project_body(c.then, r), project_body(c.else_, r)
        if r == c.process:
            return Conditional(c.expr, t, e)
        return _merge(t, e)
    if isinstance(c, CSpawn):
        rest = project_body(c.cont, r)
        if r != c.parent:
            return rest
        intro = c.cont
        assert isinstance(intro, CIntro)
        peer = f"c{c.child[1:]}"
        child = ReceiveIntro(c.parent, peer, Receive(peer, Terminated()))
        return Spawn(c.child, child, rest)
    if isinstance(c, CIntro):
        rest = project_body(c.cont, r)
        if r == c.introducer:
            return Introduce(c.left, c.right, rest)
        if r == c.right:
            return ReceiveIntro(c.introducer, c.left, rest)
        return rest
    raise TypeError(c)


def project(chor: Choreography, names: Sequence[str]) -> Network:
    procs = []
    for r in names:
        defs = tuple(ProcedureDef(d.name, d.params, project_body(d.body, r)) for d in chor.procedures)
        procs.append(Process(r, defs, project_body(chor.main, r)))
    return Network(tuple(procs))


def random_network(seed: int, max_procs: int = 4) -> Tuple[Network, Choreography]:
    rng = random.Random(seed)
    while True:
        n = rng.randint(2, max_procs)
        chor = random_choreography(rng, n)
        try:
            return project(chor, NAMES[:n]), chor
        except NotProjectable:
            continue


def corpus(count: int = 24, base_seed: int = 2024) -> List[Tuple[str, Network, Choreography]]:
    return [(f"gen{i:02d}", *random_network(base_seed + i)) for i in range(count)]
