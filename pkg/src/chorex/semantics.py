"""Abstract step relations for networks and choreographies.

Network states carry a variable mapping (gamma) instead of a connection
graph. Names bound by ``spawn`` and ``p?t`` are substituted by the actual
process name as soon as the binding action fires, so behaviours in a state
only ever mention actual process names (or binders not yet reached).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

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
    Com,
    Conditional,
    Else,
    Intro,
    Introduce,
    Network,
    Offer,
    Process,
    ProcessName,
    Receive,
    ReceiveIntro,
    Sel,
    Select,
    Send,
    Spawn,
    Spawned,
    Terminated,
    Then,
    TransitionLabel,
    VariableMapping,
    apply_renaming,
    fresh_variant,
    label_process_names,
)


class UnboundVariable(Exception):
    """A stuck network whose head actions name variables nobody can ever bind."""

    def __init__(self, unbound: Sequence[Tuple[ProcessName, ProcessName]]):
        self.unbound = tuple(unbound)
        pretty = ", ".join(f"{owner}:{var}" for owner, var in self.unbound)
        super().__init__(f"unbound process variables: {pretty}")


@dataclass(frozen=True)
class NetworkState:
    network: Network
    gamma: VariableMapping

    @classmethod
    def initial(
        cls,
        network: Network,
        connections: Optional[Iterable[Tuple[ProcessName, ProcessName]]] = None,
    ) -> "NetworkState":
        return cls(network, VariableMapping.initial(network.names, connections))


Transition = Tuple[TransitionLabel, "NetworkState"]

_KIND_ORDER = {Com: 0, Sel: 1, Intro: 2, Spawned: 3, Then: 4, Else: 5}


def transition_sort_key(label: TransitionLabel):
    names = label_process_names(label)
    return (min(names), sorted(names), _KIND_ORDER[type(label)], str(label))


# ---------------------------------------------------------------------------
# Procedure unfolding
# ---------------------------------------------------------------------------


def unfold_call(proc: Process, call: Call) -> Behaviour:
    d = proc.procedure(call.procedure)
    if d is None:
        raise KeyError(f"process {proc.name!r} has no procedure {call.procedure!r}")
    return apply_renaming(d.body, dict(zip(d.params, call.args)))


def head(proc: Process) -> Optional[Behaviour]:
    """The behaviour of ``proc`` with tail calls unfolded until an action is exposed.

    Returns None for unguarded recursion (a call cycle with no action).
    """
    b = proc.main
    seen = set()
    while isinstance(b, Call):
        key = (b.procedure, b.args)
        if key in seen:
            return None
        seen.add(key)
        b = unfold_call(proc, b)
    return b


_BINDER_SUFFIX = re.compile(r"_\d+$")


def fresh_child_name(network: Network, parent: ProcessName, binder: ProcessName) -> ProcessName:
    """``parent/binder<k>`` with k the number of earlier children of that shape."""
    base = _BINDER_SUFFIX.sub("", binder.rsplit("/", 1)[-1])
    k = 0
    while f"{parent}/{base}{k}" in network:
        k += 1
    return f"{parent}/{base}{k}"


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------


def _with_main(proc: Process, main: Behaviour) -> Process:
    return Process(proc.name, proc.procedures, main, proc.marked)


def enabled_network_transitions(state: NetworkState, strict: bool = True) -> List[Transition]:
    """All single-step abstract transitions of ``state``, deterministically ordered.

    Only processes taking part in a transition get their procedure calls
    unfolded in the successor. With ``strict``, a stuck non-terminated state
    whose head actions reference unbound variables raises UnboundVariable.
    """
    net, gamma = state.network, state.gamma
    heads: Dict[ProcessName, Behaviour] = {}
    for proc in net.processes:
        if proc.terminated:
            continue
        h = head(proc)
        if h is not None and not isinstance(h, Terminated):
            heads[proc.name] = h

    out: List[Transition] = []

    def succ(updates: Dict[ProcessName, Behaviour], gamma_changes=None, new: Sequence[Process] = ()):
        procs = {name: _with_main(net[name], b) for name, b in updates.items()}
        for child in new:
            procs[child.name] = child
        g = gamma.updated(gamma_changes) if gamma_changes else gamma
        return NetworkState(net.replace(procs), g)

    for p, h in heads.items():
        if isinstance(h, Send):
            q = gamma.resolve(p, h.to)
            hq = heads.get(q) if q is not None else None
            if isinstance(hq, Receive) and q != p and gamma.resolve(q, hq.frm) == p:
                out.append((Com(p, h.expr, q), succ({p: h.cont, q: hq.cont})))
        elif isinstance(h, Select):
            q = gamma.resolve(p, h.to)
            hq = heads.get(q) if q is not None else None
            if isinstance(hq, Offer) and q != p and gamma.resolve(q, hq.frm) == p:
                branch = hq.branch(h.label)
                if branch is not None:
                    out.append((Sel(p, q, h.label), succ({p: h.cont, q: branch})))
        elif isinstance(h, Introduce):
            q, r = gamma.resolve(p, h.left), gamma.resolve(p, h.right)
            if q is None or r is None or len({p, q, r}) != 3:
                continue
            hq, hr = heads.get(q), heads.get(r)
            if not (isinstance(hq, ReceiveIntro) and isinstance(hr, ReceiveIntro)):
                continue
            if gamma.resolve(q, hq.frm) != p or gamma.resolve(r, hr.frm) != p:
                continue
            cont_q = apply_renaming(hq.cont, {hq.binder: r})
            cont_r = apply_renaming(hr.cont, {hr.binder: q})
            changes = {(q, hq.binder): r, (q, r): r, (r, hr.binder): q, (r, q): q}
            out.append((Intro(p, q, r), succ({p: h.cont, q: cont_q, r: cont_r}, changes)))
        elif isinstance(h, Conditional):
            out.append((Then(p, h.expr), succ({p: h.then})))
            out.append((Else(p, h.expr), succ({p: h.else_})))
        elif isinstance(h, Spawn):
            child_name = fresh_child_name(net, p, h.binder)
            parent = net[p]
            child = Process(child_name, parent.procedures, apply_renaming(h.child, {h.binder: child_name}))
            changes = {
                (p, h.binder): child_name,
                (p, child_name): child_name,
                (child_name, child_name): child_name,
                (child_name, h.binder): child_name,
                (child_name, p): p,
            }
            cont = apply_renaming(h.cont, {h.binder: child_name})
            out.append((Spawned(p, child_name), succ({p: cont}, changes, [child])))

    out.sort(key=lambda t: transition_sort_key(t[0]))
    if strict and not out:
        unbound = unbound_heads(state)
        if unbound:
            raise UnboundVariable(unbound)
    return out


def unbound_heads(state: NetworkState) -> List[Tuple[ProcessName, ProcessName]]:
    """Head-action operands with no gamma entry; such an action can never fire."""
    out = []
    for proc in state.network.processes:
        if proc.terminated:
            continue
        h = head(proc)
        operands: Tuple[ProcessName, ...] = ()
        if isinstance(h, Send) or isinstance(h, Select):
            operands = (h.to,)
        elif isinstance(h, (Receive, Offer, ReceiveIntro)):
            operands = (h.frm,)
        elif isinstance(h, Introduce):
            operands = (h.left, h.right)
        for var in operands:
            if state.gamma.resolve(proc.name, var) is None:
                out.append((proc.name, var))
    return sorted(out)


def live_processes(state: NetworkState) -> FrozenSet[ProcessName]:
    return frozenset(state.network.live_names)


# ---------------------------------------------------------------------------
# Choreographies
# ---------------------------------------------------------------------------


def _pair(a: ProcessName, b: ProcessName) -> FrozenSet[ProcessName]:
    return frozenset((a, b))


@dataclass(frozen=True)
class ChorState:
    body: ChorBody
    procedures: Tuple[ChorProcedure, ...]
    connections: FrozenSet[FrozenSet[ProcessName]]
    live: FrozenSet[ProcessName]

    @classmethod
    def initial(
        cls,
        chor: Choreography,
        names: Optional[Iterable[ProcessName]] = None,
        connections: Optional[Iterable[Tuple[ProcessName, ProcessName]]] = None,
    ) -> "ChorState":
        names = frozenset(names) if names is not None else chor_process_names(chor)
        if connections is None:
            conns = frozenset(_pair(p, q) for p in names for q in names if p != q)
        else:
            conns = frozenset(_pair(p, q) for p, q in connections)
        return cls(chor.main, chor.procedures, conns, names)

    def procedure(self, name: str) -> Optional[ChorProcedure]:
        for d in self.procedures:
            if d.name == name:
                return d
        return None

    def connected(self, a: ProcessName, b: ProcessName) -> bool:
        return _pair(a, b) in self.connections


def chor_free_names(c: ChorBody) -> FrozenSet[ProcessName]:
    if isinstance(c, CTerminated):
        return frozenset()
    if isinstance(c, CCall):
        return frozenset(c.args)
    if isinstance(c, CCom):
        return chor_free_names(c.cont) | {c.sender, c.receiver}
    if isinstance(c, CSel):
        return chor_free_names(c.cont) | {c.sender, c.receiver}
    if isinstance(c, CIntro):
        return chor_free_names(c.cont) | {c.introducer, c.left, c.right}
    if isinstance(c, CCond):
        return chor_free_names(c.then) | chor_free_names(c.else_) | {c.process}
    if isinstance(c, CSpawn):
        return (chor_free_names(c.cont) - {c.child}) | {c.parent}
    raise TypeError(f"not a choreography body: {c!r}")


def chor_all_names(c: ChorBody) -> FrozenSet[ProcessName]:
    if isinstance(c, CSpawn):
        return chor_all_names(c.cont) | {c.parent, c.child}
    if isinstance(c, CCond):
        return chor_all_names(c.then) | chor_all_names(c.else_) | {c.process}
    if isinstance(c, (CCom, CSel, CIntro)):
        return chor_free_names(c) | chor_all_names(c.cont)
    return chor_free_names(c)


def chor_process_names(chor: Choreography) -> FrozenSet[ProcessName]:
    """Names a choreography refers to globally (free in main or in a procedure beyond its params)."""
    out = set(chor_free_names(chor.main))
    for d in chor.procedures:
        out |= chor_free_names(d.body) - set(d.params)
    return frozenset(out)


def chor_substitute(c: ChorBody, m: Dict[ProcessName, ProcessName]) -> ChorBody:
    """Capture-avoiding substitution of free names; ``spawns`` binders are respected."""
    m = {k: v for k, v in m.items() if k != v}
    if not m:
        return c
    r = lambda n: m.get(n, n)  # noqa: E731
    if isinstance(c, CTerminated):
        return c
    if isinstance(c, CCall):
        return CCall(c.procedure, tuple(r(a) for a in c.args))
    if isinstance(c, CCom):
        return CCom(r(c.sender), c.expr, r(c.receiver), chor_substitute(c.cont, m))
    if isinstance(c, CSel):
        return CSel(r(c.sender), r(c.receiver), c.label, chor_substitute(c.cont, m))
    if isinstance(c, CIntro):
        return CIntro(r(c.introducer), r(c.left), r(c.right), chor_substitute(c.cont, m))
    if isinstance(c, CCond):
        return CCond(r(c.process), c.expr, chor_substitute(c.then, m), chor_substitute(c.else_, m))
    if isinstance(c, CSpawn):
        binder, cont = c.child, c.cont
        inner = {k: v for k, v in m.items() if k != binder}
        used = chor_free_names(cont)
        if any(v == binder and k in used for k, v in inner.items()):
            fresh = fresh_variant(binder, set(m) | set(m.values()) | chor_all_names(cont))
            cont = chor_substitute(cont, {binder: fresh})
            binder = fresh
        return CSpawn(r(c.parent), binder, chor_substitute(cont, inner))
    raise TypeError(f"not a choreography body: {c!r}")


# An action key plus its residual continuation(s): one for interactions, two for conditionals.
_Head = Tuple[tuple, Tuple[ChorBody, ...]]


def _action_names(action: tuple) -> FrozenSet[ProcessName]:
    kind = action[0]
    if kind == "com":
        return frozenset((action[1], action[3]))
    if kind == "sel":
        return frozenset((action[1], action[2]))
    if kind == "spawn":
        return frozenset((action[1], action[2]))
    if kind == "intro":
        return frozenset(action[1:4])
    return frozenset((action[1],))


def _rebuild(prefix: ChorBody, rest: ChorBody) -> ChorBody:
    if isinstance(prefix, CCom):
        return CCom(prefix.sender, prefix.expr, prefix.receiver, rest)
    if isinstance(prefix, CSel):
        return CSel(prefix.sender, prefix.receiver, prefix.label, rest)
    if isinstance(prefix, CIntro):
        return CIntro(prefix.introducer, prefix.left, prefix.right, rest)
    if isinstance(prefix, CSpawn):
        return CSpawn(prefix.parent, prefix.child, rest)
    raise TypeError(prefix)


def chor_heads(state: ChorState, body: Optional[ChorBody] = None) -> List[_Head]:
    """Actions that structural precongruence can bring to the front of ``body``."""
    return _heads(state, state.body if body is None else body, frozenset(), frozenset())


def _heads(state: ChorState, c: ChorBody, blocked: FrozenSet[str], unfolded: FrozenSet) -> List[_Head]:
    if isinstance(c, CTerminated):
        return []
    if isinstance(c, CCall):
        key = (c.procedure, c.args)
        d = state.procedure(c.procedure)
        if d is None or key in unfolded:
            return []
        body = chor_substitute(d.body, dict(zip(d.params, c.args)))
        return _heads(state, body, blocked, unfolded | {key})
    if isinstance(c, CCond):
        out: List[_Head] = []
        if c.process not in blocked:
            out.append((("cond", c.process, c.expr), (c.then, c.else_)))
        inner = blocked | {c.process}
        h1 = _heads(state, c.then, inner, unfolded)
        h2 = dict(_heads(state, c.else_, inner, unfolded))
        for action, res1 in h1:
            res2 = h2.get(action)
            if res2 is not None and len(res2) == len(res1):
                out.append((action, tuple(CCond(c.process, c.expr, a, b) for a, b in zip(res1, res2))))
        return out
    if isinstance(c, CCom):
        action = ("com", c.sender, c.expr, c.receiver)
    elif isinstance(c, CSel):
        action = ("sel", c.sender, c.receiver, c.label)
    elif isinstance(c, CIntro):
        action = ("intro", c.introducer, c.left, c.right)
    elif isinstance(c, CSpawn):
        if c.child in blocked and c.parent not in blocked:
            # the skipped prefix still talks to an older process of this name
            child = fresh_variant(c.child, blocked | state.live)
            c = CSpawn(c.parent, child, chor_substitute(c.cont, {c.child: child}))
        action = ("spawn", c.parent, c.child)
    else:
        raise TypeError(f"not a choreography body: {c!r}")
    names = _action_names(action)
    out = []
    if not names & blocked:
        out.append((action, (c.cont,)))
    seen = {a for a, _ in out}
    for a, res in _heads(state, c.cont, blocked | names, unfolded):
        if a in seen:
            continue
        seen.add(a)
        out.append((a, tuple(_rebuild(c, r) for r in res)))
    return out


def _chor_fresh(state: ChorState, binder: ProcessName, residual: ChorBody) -> ProcessName:
    if binder not in state.live:
        return binder
    return fresh_variant(binder, set(state.live) | chor_all_names(residual))


def enabled_chor_transitions(state: ChorState) -> List[Tuple[TransitionLabel, ChorState]]:
    out: List[Tuple[TransitionLabel, ChorState]] = []

    def succ(body: ChorBody, conns=None, live=None) -> ChorState:
        return ChorState(
            body,
            state.procedures,
            state.connections if conns is None else conns,
            state.live if live is None else live,
        )

    for action, res in chor_heads(state):
        kind = action[0]
        if kind == "com":
            _, p, e, q = action
            if state.connected(p, q):
                out.append((Com(p, e, q), succ(res[0])))
        elif kind == "sel":
            _, p, q, label = action
            if state.connected(p, q):
                out.append((Sel(p, q, label), succ(res[0])))
        elif kind == "intro":
            _, p, q, r = action
            if state.connected(p, q) and state.connected(p, r):
                out.append((Intro(p, q, r), succ(res[0], state.connections | {_pair(q, r)})))
        elif kind == "spawn":
            _, p, q = action
            fresh = _chor_fresh(state, q, res[0])
            body = chor_substitute(res[0], {q: fresh})
            out.append(
                (
                    Spawned(p, fresh),
                    succ(body, state.connections | {_pair(p, fresh)}, state.live | {fresh}),
                )
            )
        else:
            _, p, e = action
            out.append((Then(p, e), succ(res[0])))
            out.append((Else(p, e), succ(res[1])))
    out.sort(key=lambda t: transition_sort_key(t[0]))
    return out
