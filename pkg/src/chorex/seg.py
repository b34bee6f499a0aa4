"""Symbolic execution graphs, built depth-first with loop closure and leak checks."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .model import (
    Behaviour,
    Call,
    Conditional,
    Else,
    Introduce,
    Network,
    Offer,
    ProcessName,
    ProcessRenaming,
    Receive,
    ReceiveIntro,
    Select,
    Send,
    Spawn,
    Then,
    TransitionLabel,
    apply_renaming,
    iter_network_mappings,
    label_process_names,
    shape,
)
from .semantics import (
    NetworkState,
    Transition,
    enabled_network_transitions,
    transition_sort_key,
    unbound_heads,
)
from .syntax import compact_behaviour

DEFAULT_NODE_BUDGET = 100_000


@dataclass(frozen=True)
class SegNode:
    id: int
    state: NetworkState
    marked: FrozenSet[ProcessName]
    reset_count: int
    choice_path: Tuple[str, ...]
    parent: Optional[int] = None

    @property
    def markings(self) -> Dict[ProcessName, bool]:
        return {name: name in self.marked for name in self.state.network.live_names}

    @property
    def network(self) -> Network:
        return self.state.network


@dataclass(frozen=True)
class SegEdge:
    source: int
    target: int
    label: TransitionLabel
    loop_mapping: Optional[ProcessRenaming] = None

    @property
    def is_loop(self) -> bool:
        return self.loop_mapping is not None


@dataclass
class Seg:
    nodes: List[SegNode] = field(default_factory=list)
    edges: List[SegEdge] = field(default_factory=list)
    root: int = 0

    def node(self, node_id: int) -> SegNode:
        return self.nodes[node_id]

    def outgoing(self, node_id: int) -> List[SegEdge]:
        return [e for e in self.edges if e.source == node_id]

    def incoming(self, node_id: int) -> List[SegEdge]:
        return [e for e in self.edges if e.target == node_id]

    @property
    def loop_edges(self) -> List[SegEdge]:
        return [e for e in self.edges if e.is_loop]

    def path_to(self, node_id: int) -> List[SegNode]:
        """Root-to-node branch, root first."""
        out = []
        cur: Optional[int] = node_id
        while cur is not None:
            out.append(self.nodes[cur])
            cur = self.nodes[cur].parent
        out.reverse()
        return out


class ExtractionFailure(Exception):
    kind = "ExtractionFailure"
    exit_code = 1

    def __init__(self, node_id: int, diagnostic: str, witness=None):
        self.node_id = node_id
        self.diagnostic = diagnostic
        self.witness = witness
        super().__init__(f"{self.kind} at node {node_id}: {diagnostic}")


class Deadlock(ExtractionFailure):
    kind = "Deadlock"
    exit_code = 2


class ResourceLeak(ExtractionFailure):
    kind = "ResourceLeak"
    exit_code = 3


class NoValidLoop(ExtractionFailure):
    kind = "NoValidLoop"
    exit_code = 4


class BudgetExhausted(ExtractionFailure):
    kind = "BudgetExhausted"
    exit_code = 4


# ---------------------------------------------------------------------------
# Evaluated variables
# ---------------------------------------------------------------------------


def evaluated_variables(s: NetworkState) -> Set[Tuple[ProcessName, ProcessName]]:
    """(owner, variable) pairs some future step of a live process may look up in gamma.

    Syntactic over-approximation: operands in the main behaviour and in every
    procedure reachable through calls. Names bound by a spawn or an
    introduction receive are skipped since the step that binds them also
    fixes their gamma entry; spawned children are accounted for once they exist.
    """
    out: Set[Tuple[ProcessName, ProcessName]] = set()
    for proc in s.network.processes:
        if proc.terminated:
            continue
        seen: Set[Tuple[str, Tuple[Optional[str], ...]]] = set()
        todo: List[Tuple[Behaviour, FrozenSet[str]]] = [(proc.main, frozenset())]
        while todo:
            b, bound = todo.pop()
            for var in _operands(b, bound, todo):
                out.add((proc.name, var))
            if isinstance(b, Call):
                d = proc.procedure(b.procedure)
                if d is None:
                    continue
                key = (b.procedure, tuple(None if a in bound else a for a in b.args))
                if key in seen:
                    continue
                seen.add(key)
                # Parameters receiving a bound name stay opaque; the rest are substituted.
                subst = {p: a for p, a in zip(d.params, b.args) if a not in bound}
                body = apply_renaming(d.body, subst)
                todo.append((body, frozenset(p for p, a in zip(d.params, b.args) if a in bound)))
    return out


def _operands(b: Behaviour, bound: FrozenSet[str], todo) -> List[str]:
    """Free operands of the head of ``b``; continuations are queued on ``todo``."""
    free = lambda names: [n for n in names if n not in bound]  # noqa: E731
    if isinstance(b, (Send, Select)):
        todo.append((b.cont, bound))
        return free([b.to])
    if isinstance(b, Receive):
        todo.append((b.cont, bound))
        return free([b.frm])
    if isinstance(b, Offer):
        todo.extend((branch, bound) for _, branch in b.branches)
        return free([b.frm])
    if isinstance(b, ReceiveIntro):
        todo.append((b.cont, bound | {b.binder}))
        return free([b.frm])
    if isinstance(b, Introduce):
        todo.append((b.cont, bound))
        return free([b.left, b.right])
    if isinstance(b, Conditional):
        todo.append((b.then, bound))
        todo.append((b.else_, bound))
    elif isinstance(b, Spawn):
        todo.append((b.cont, bound | {b.binder}))
    return []


def gamma_consistent(
    candidate: NetworkState, ancestor: NetworkState, m: Dict[ProcessName, ProcessName]
) -> bool:
    """Lookups the candidate may still perform agree with the ancestor's under ``m``."""
    r = lambda n: m.get(n, n)  # noqa: E731
    for owner, var in evaluated_variables(candidate):
        here = candidate.gamma.resolve(owner, var)
        there = ancestor.gamma.resolve(r(owner), r(var))
        if (here is None) != (there is None):
            return False
        if here is not None and r(here) != there:
            return False
    return True


def is_subsequence(short: Sequence[str], long: Sequence[str]) -> bool:
    it = iter(long)
    return all(any(x == y for y in it) for x in short)


# ---------------------------------------------------------------------------
# Loop closure and leaks
# ---------------------------------------------------------------------------


def close_loop(
    candidate: NetworkState,
    path: Sequence[SegNode],
    marked: FrozenSet[ProcessName] = frozenset(),
    reset_count: Optional[int] = None,
    choice_path: Optional[Tuple[str, ...]] = None,
) -> Optional[Tuple[int, ProcessRenaming]]:
    """First ancestor (root first) the candidate may loop back to, with the renaming
    from the candidate's live processes onto the ancestor's.

    When ``reset_count``/``choice_path`` are omitted the validity gate is skipped and
    markings are ignored, which is convenient for inspecting plain equivalence.
    """
    gated = reset_count is not None
    for anc in path:
        if gated:
            if reset_count <= anc.reset_count:
                continue
            if not is_subsequence(anc.choice_path, choice_path or ()):
                continue
        m = _find_mapping(candidate, anc, marked if gated else None, injective=True)
        if m is not None:
            return anc.id, ProcessRenaming.of(m)
    return None


def _find_mapping(candidate: NetworkState, anc: SegNode, marked, injective: bool):
    cand_net, anc_net = candidate.network, anc.state.network
    for m in iter_network_mappings(cand_net, anc_net, injective=injective, surjective=True):
        if not injective and len(set(m.values())) == len(m):
            continue
        if marked is not None:
            live = set(cand_net.live_names)
            if {m[p] for p in marked if p in live} != set(anc.marked) & set(anc_net.live_names):
                continue
        if gamma_consistent(candidate, anc.state, m):
            return m
    return None


def detect_leak(candidate: NetworkState, path: Sequence[SegNode]) -> Optional[ProcessRenaming]:
    """A surjective, non-injective renaming of the candidate onto some ancestor."""
    n_live = len(candidate.network.live_names)
    for anc in path:
        if len(anc.state.network.live_names) >= n_live:
            continue
        m = _find_mapping(candidate, anc, None, injective=False)
        if m is not None:
            return ProcessRenaming.of(m)
    return None


def _shapes(net: Network) -> FrozenSet[str]:
    return frozenset(shape(net[p].main) for p in net.live_names)


def _stalled_growth(candidate: NetworkState, marked: FrozenSet[str], anc: SegNode) -> bool:
    """The network grew since ``anc`` without changing its kinds of behaviour,
    while some process sat idle the whole time."""
    cand_net, anc_net = candidate.network, anc.state.network
    if len(cand_net.live_names) <= len(anc_net.live_names):
        return False
    if _shapes(cand_net) != _shapes(anc_net):
        return False
    for name in anc_net.live_names:
        if name in cand_net and name not in marked and cand_net[name].main == anc_net[name].main:
            return True
    return False


# ---------------------------------------------------------------------------
# Scheduling policies
# ---------------------------------------------------------------------------

Group = List[Transition]


def group_transitions(transitions: Sequence[Transition]) -> List[Group]:
    """Pair each Then with its Else; every other transition stands alone."""
    groups: List[Group] = []
    pending: Dict[Tuple[str, str], Group] = {}
    for t in transitions:
        label = t[0]
        if isinstance(label, (Then, Else)):
            key = (label.process, label.expr)
            if key not in pending:
                pending[key] = []
                groups.append(pending[key])
            pending[key].append(t)
        else:
            groups.append([t])
    for g in groups:
        g.sort(key=lambda t: 0 if isinstance(t[0], Then) else 1)
    return groups


def _group_key(g: Group):
    return transition_sort_key(g[0][0])


def _hash_key(g: Group):
    return hashlib.sha256(str(g[0][0]).encode()).hexdigest()


_ORDERINGS: Dict[str, Callable[[List[Group]], Group]] = {
    "lex": lambda gs: min(gs, key=_group_key),
    "lex-max": lambda gs: max(gs, key=_group_key),
    "hash": lambda gs: min(gs, key=lambda g: (_hash_key(g), _group_key(g))),
}

POLICIES = tuple(_ORDERINGS)


def choose_group(transitions: Sequence[Transition], marked: FrozenSet[str], policy: str = "lex") -> Group:
    """Pick the action to expand; actions moving an unmarked process go first."""
    try:
        order = _ORDERINGS[policy]
    except KeyError:
        raise ValueError(f"unknown scheduling policy {policy!r}; choose from {', '.join(POLICIES)}") from None
    groups = group_transitions(transitions)
    fresh = [g for g in groups if label_process_names(g[0][0]) - marked]
    return order(fresh or groups)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def node_budget_from_env(default: int = DEFAULT_NODE_BUDGET) -> int:
    raw = os.environ.get("CHOREX_NODE_BUDGET")
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"CHOREX_NODE_BUDGET must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError("CHOREX_NODE_BUDGET must be positive")
    return value


def _advance_markings(
    marked: FrozenSet[str], reset_count: int, label: TransitionLabel, succ: NetworkState
) -> Tuple[FrozenSet[str], int]:
    live = set(succ.network.live_names)
    now = (marked | label_process_names(label)) & live
    if now == live:
        return frozenset(), reset_count + 1
    return frozenset(now), reset_count


def build_seg(
    network: Network,
    initial_connections=None,
    policy: str = "lex",
    node_budget: Optional[int] = None,
) -> Seg:
    """Depth-first SEG construction; raises an ExtractionFailure subclass on failure."""
    budget = node_budget if node_budget is not None else node_budget_from_env()
    seg = Seg()
    root_state = NetworkState.initial(network, initial_connections)
    seg.nodes.append(SegNode(0, root_state, frozenset(), 0, ()))
    expand: List[int] = [0]

    while expand:
        node = seg.nodes[expand.pop()]
        state = node.state
        if state.network.is_terminated:
            continue
        transitions = enabled_network_transitions(state, strict=False)
        if not transitions:
            stuck = _describe_stuck(state)
            raise Deadlock(node.id, stuck, witness=state)
        group = choose_group(transitions, node.marked, policy)
        branch = len(group) == 2
        path = seg.path_to(node.id)
        created: List[int] = []
        for label, succ in group:
            marked, resets = _advance_markings(node.marked, node.reset_count, label, succ)
            choice = node.choice_path
            if branch:
                choice = choice + ("then" if isinstance(label, Then) else "else",)
            closed = close_loop(succ, path, marked, resets, choice)
            if closed is not None:
                target, mapping = closed
                seg.edges.append(SegEdge(node.id, target, label, mapping))
                continue
            leak = detect_leak(succ, path)
            if leak is not None:
                raise ResourceLeak(node.id, f"after {label}: {leak}", witness=leak)
            _check_progress(seg, path, succ, marked, resets, label)
            if len(seg.nodes) >= budget:
                raise BudgetExhausted(node.id, f"node budget of {budget} exhausted")
            new_id = len(seg.nodes)
            seg.nodes.append(SegNode(new_id, succ, marked, resets, choice, node.id))
            seg.edges.append(SegEdge(node.id, new_id, label))
            created.append(new_id)
        # the Then subtree is completed before the Else node is expanded
        expand.extend(reversed(created))
    return _renumber(seg)


def _renumber(seg: Seg) -> Seg:
    """Renumber nodes in depth-first preorder so ids follow the branch structure."""
    children: Dict[int, List[int]] = {}
    for e in seg.edges:
        if not e.is_loop:
            children.setdefault(e.source, []).append(e.target)
    order: List[int] = []
    stack = [seg.root]
    while stack:
        n = stack.pop()
        order.append(n)
        stack.extend(reversed(children.get(n, [])))
    new_id = {old: i for i, old in enumerate(order)}
    nodes = []
    for old in order:
        n = seg.nodes[old]
        parent = None if n.parent is None else new_id[n.parent]
        nodes.append(SegNode(new_id[old], n.state, n.marked, n.reset_count, n.choice_path, parent))
    edges = [SegEdge(new_id[e.source], new_id[e.target], e.label, e.loop_mapping) for e in seg.edges]
    edges.sort(key=lambda e: (e.source, 0 if not isinstance(e.label, Else) else 1))
    return Seg(nodes, edges, 0)


def _check_progress(seg: Seg, path, succ: NetworkState, marked, resets: int, label) -> None:
    for anc in path:
        if anc.reset_count != resets:
            continue
        m = _find_mapping(succ, anc, marked, injective=True)
        if m is not None:
            cycle = " ; ".join(_labels_between(seg, anc.id, path) + [str(label)])
            raise NoValidLoop(
                anc.id,
                f"state returns to node {anc.id} without every process acting: {cycle}",
                witness=(anc.id, ProcessRenaming.of(m)),
            )
        if _stalled_growth(succ, marked, anc):
            cycle = " ; ".join(_labels_between(seg, anc.id, path) + [str(label)])
            raise NoValidLoop(
                anc.id,
                f"processes keep being added while others never act: {cycle}",
                witness=(anc.id, None),
            )


def _labels_between(seg: Seg, start: int, path: Sequence[SegNode]) -> List[str]:
    ids = [n.id for n in path]
    tail = ids[ids.index(start):]
    out = []
    for a, b in zip(tail, tail[1:]):
        for e in seg.edges:
            if e.source == a and e.target == b and not e.is_loop:
                out.append(str(e.label))
                break
    return out


def _describe_stuck(state: NetworkState) -> str:
    parts = []
    for proc in state.network.processes:
        if not proc.terminated:
            parts.append(f"{proc.name}: {compact_behaviour(proc.main)}")
    unbound = unbound_heads(state)
    text = "no transition enabled for " + " | ".join(parts)
    if unbound:
        text += "; unbound variables " + ", ".join(f"{o}:{v}" for o, v in unbound)
    return text


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\l")


def node_text(node: SegNode) -> str:
    lines = []
    for proc in node.state.network.processes:
        if proc.terminated:
            continue
        mark = "*" if proc.name in node.marked else ""
        lines.append(f"{proc.name}{mark}: {compact_behaviour(proc.main)}")
    if not lines:
        lines.append("0")
    lines.append(f"resets={node.reset_count}")
    return "\n".join(lines) + "\n"


def mapping_text(m: ProcessRenaming) -> str:
    moved = m.non_identity()
    if not moved:
        return "id"
    return ", ".join(f"{k} -> {v}" for k, v in sorted(moved.items()))


def export_dot(seg: Seg) -> str:
    out = ["digraph seg {", '    node [shape=box, fontname="monospace"];']
    for node in seg.nodes:
        out.append(f'    n{node.id} [label="{_dot_escape(node_text(node))}"];')
    for e in seg.edges:
        if e.is_loop:
            out.append(f'    n{e.source} -> n{e.target} [label="{_dot_escape(str(e.label))}\\n'
                       f'{_dot_escape(mapping_text(e.loop_mapping))}", style=dashed];')
        else:
            out.append(f'    n{e.source} -> n{e.target} [label="{_dot_escape(str(e.label))}"];')
    out.append("}")
    return "\n".join(out) + "\n"
