"""Reading a choreography off a SEG: one procedure per loop entry."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .model import (
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
    Com,
    Else,
    Intro,
    Network,
    ProcessName,
    Sel,
    Spawned,
    Then,
)
from .seg import Seg, SegEdge, build_seg
from .semantics import chor_free_names

MAIN = "main"


@dataclass
class ProcedureTree:
    """One tree of the unrolled SEG.

    ``nodes`` lists the SEG nodes the tree covers (root first); ``exits`` are the
    edges leaving the tree, each ending in a call to the procedure of its target.
    """

    name: str
    root: int
    nodes: List[int] = field(default_factory=list)
    exits: List[SegEdge] = field(default_factory=list)
    params: Tuple[ProcessName, ...] = ()
    call_args: Dict[SegEdge, Tuple[ProcessName, ...]] = field(default_factory=dict)


def loop_nodes(seg: Seg) -> List[int]:
    return sorted({e.target for e in seg.loop_edges})


def unroll(seg: Seg) -> List[ProcedureTree]:
    """Split every loop node into entry and exit; the main tree comes first, then X1, X2, ..."""
    entries = loop_nodes(seg)
    names = {n: f"X{i + 1}" for i, n in enumerate(entries)}
    children: Dict[int, List[SegEdge]] = {}
    for e in seg.edges:
        children.setdefault(e.source, []).append(e)

    trees = []
    roots = [(MAIN, seg.root)] + [(names[n], n) for n in entries]
    for name, root in roots:
        tree = ProcedureTree(name, root)
        if name == MAIN and root in names:
            trees.append(tree)
            continue
        stack = [root]
        while stack:
            n = stack.pop()
            tree.nodes.append(n)
            for e in reversed(children.get(n, [])):
                if e.is_loop or e.target in names:
                    tree.exits.append(e)
                else:
                    stack.append(e.target)
        tree.exits.sort(key=lambda e: (e.source, e.target))
        trees.append(tree)
    return trees


def infer_parameters(tree: ProcedureTree, seg: Seg) -> Tuple[Tuple[ProcessName, ...], Dict[SegEdge, Tuple[ProcessName, ...]]]:
    """Parameters of the procedure rooted at ``tree.root`` and the arguments of every edge calling it.

    Parameters are the names some loop mapping into the entry moves; a loop edge
    passes the preimages of those names, any other incoming edge passes them unchanged.
    """
    if tree.name == MAIN:
        return (), {}
    incoming = seg.incoming(tree.root)
    moved = set()
    for e in incoming:
        if e.is_loop:
            moved |= set(e.loop_mapping.non_identity().values())
    params = tuple(sorted(moved))
    return params, {e: _args_for(e, params) for e in incoming}


def _args_for(edge: SegEdge, params: Tuple[ProcessName, ...]) -> Tuple[ProcessName, ...]:
    if not edge.is_loop:
        return params
    inverse: Dict[ProcessName, ProcessName] = {}
    for src, dst in edge.loop_mapping.pairs:
        if dst in inverse:
            raise ValueError(f"loop mapping {edge.loop_mapping} is not injective")
        inverse[dst] = src
    return tuple(inverse.get(p, p) for p in params)


def _prefix(label, cont: ChorBody) -> ChorBody:
    if isinstance(label, Com):
        return CCom(label.sender, label.expr, label.receiver, cont)
    if isinstance(label, Sel):
        return CSel(label.sender, label.receiver, label.label, cont)
    if isinstance(label, Intro):
        return CIntro(label.introducer, label.left, label.right, cont)
    if isinstance(label, Spawned):
        return CSpawn(label.parent, label.child, cont)
    raise TypeError(f"not an interaction label: {label}")


def _bodies(seg: Seg, trees: List[ProcedureTree]) -> Dict[str, ChorBody]:
    by_root = {t.root: t for t in trees if t.name != MAIN}
    children: Dict[int, List[SegEdge]] = {}
    for e in seg.edges:
        children.setdefault(e.source, []).append(e)

    def ref(e: SegEdge, content: Dict[int, ChorBody]) -> ChorBody:
        callee = by_root.get(e.target)
        if callee is not None:
            return CCall(callee.name, _args_for(e, callee.params))
        return content[e.target]

    content: Dict[int, ChorBody] = {}
    # preorder ids: every tree child has a larger id than its parent
    for node in sorted((n.id for n in seg.nodes), reverse=True):
        out = children.get(node, [])
        if not out:
            content[node] = CTerminated()
        elif len(out) == 1:
            content[node] = _prefix(out[0].label, ref(out[0], content))
        else:
            then = next(e for e in out if isinstance(e.label, Then))
            else_ = next(e for e in out if isinstance(e.label, Else))
            content[node] = CCond(then.label.process, then.label.expr, ref(then, content), ref(else_, content))
    out_bodies = {}
    for t in trees:
        if t.name == MAIN and t.root in by_root:
            callee = by_root[t.root]
            out_bodies[MAIN] = CCall(callee.name, callee.params)
        else:
            out_bodies[t.name] = content[t.root]
    return out_bodies


def _close_parameters(seg: Seg, trees: List[ProcedureTree]) -> Dict[str, ChorBody]:
    """Grow parameter lists until no procedure silently captures a caller's parameter.

    A name that is a parameter of a caller and occurs free in the callee must be
    passed along, otherwise the callee would fix the name its caller received.
    The same holds for spawned names: only the initial processes may occur free.
    """
    procs = [t for t in trees if t.name != MAIN]
    initial = set(seg.node(seg.root).network.names)
    while True:
        bodies = _bodies(seg, trees)
        callers: Dict[str, set] = {t.name: set() for t in procs}
        for t in trees:
            _collect_calls(bodies[t.name], t.name, callers)
        changed = False
        params = {t.name: set(t.params) for t in procs}
        for t in procs:
            free = chor_free_names(bodies[t.name])
            extra = free - initial - set(t.params)
            for caller in callers[t.name]:
                extra |= (params.get(caller, set()) & free) - set(t.params)
            if extra:
                t.params = tuple(sorted(set(t.params) | extra))
                changed = True
        if not changed:
            return bodies


def _collect_calls(c: ChorBody, owner: str, callers: Dict[str, set]) -> None:
    stack = [c]
    while stack:
        c = stack.pop()
        if isinstance(c, CCall):
            if c.procedure in callers:
                callers[c.procedure].add(owner)
        elif isinstance(c, CCond):
            stack.extend((c.then, c.else_))
        elif not isinstance(c, CTerminated):
            stack.append(c.cont)


def emit(trees: List[ProcedureTree], seg: Seg) -> Choreography:
    for t in trees:
        if t.name != MAIN and not t.call_args:
            t.params, t.call_args = infer_parameters(t, seg)
    bodies = _close_parameters(seg, trees)
    for t in trees:
        if t.name != MAIN:
            t.call_args = {e: _args_for(e, t.params) for e in seg.incoming(t.root)}
    procedures = tuple(ChorProcedure(t.name, t.params, bodies[t.name]) for t in trees if t.name != MAIN)
    return Choreography(procedures, bodies[MAIN])


def synthesize(seg: Seg) -> Choreography:
    return emit(unroll(seg), seg)


def extract(
    network: Network,
    initial_connections=None,
    policy: str = "lex",
    node_budget: Optional[int] = None,
) -> Tuple[Choreography, Seg]:
    """Build the SEG and read a choreography off it; failures propagate as ExtractionFailure."""
    seg = build_seg(network, initial_connections, policy=policy, node_budget=node_budget)
    return synthesize(seg), seg
