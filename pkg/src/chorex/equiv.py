"""Bounded strong bisimulation between networks and choreographies.

Both sides are explored in lockstep. Spawned processes get different names on
the two sides, so a bijection theta between spawned names is grown as spawn
labels are matched; every other name must agree exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

from .model import (
    Network,
    Process,
    ProcedureDef,
    ProcessName,
    Spawned,
    TransitionLabel,
    VariableMapping,
    all_names,
    apply_renaming,
    is_spawned_name,
    rename_label,
)
from .semantics import ChorState, NetworkState, enabled_chor_transitions, enabled_network_transitions

Step = Callable[[Hashable], List[Tuple[TransitionLabel, Hashable]]]


@dataclass(frozen=True)
class Bisimilar:
    depth: int

    def __str__(self) -> str:
        return f"Bisimilar({self.depth})"


@dataclass(frozen=True)
class CounterexampleFound:
    trace: Tuple[TransitionLabel, ...]
    side: str

    def __str__(self) -> str:
        steps = "; ".join(str(label) for label in self.trace)
        return f"CounterexampleFound(side={self.side}, trace=[{steps}])"


Verdict = Union[Bisimilar, CounterexampleFound]

_Theta = FrozenSet[Tuple[ProcessName, ProcessName]]


class _Product:
    def __init__(self, step_a: Step, step_b: Step, side_a: str, side_b: str):
        self.step_a, self.step_b = step_a, step_b
        self.side_a, self.side_b = side_a, side_b
        self.proved: Dict[Tuple, int] = {}
        self.cache_a: Dict[Hashable, list] = {}
        self.cache_b: Dict[Hashable, list] = {}

    def _succ(self, cache, step, state):
        out = cache.get(state)
        if out is None:
            out = cache[state] = step(state)
        return out

    def run(self, a, b, depth: int) -> Optional[CounterexampleFound]:
        return self._check(a, b, frozenset(), depth, ())

    def _check(self, a, b, theta: _Theta, depth: int, trace) -> Optional[CounterexampleFound]:
        if depth == 0:
            return None
        key = (a, b, theta)
        if self.proved.get(key, 0) >= depth:
            return None
        ta = self._succ(self.cache_a, self.step_a, a)
        tb = self._succ(self.cache_b, self.step_b, b)
        fwd = dict(theta)
        bwd = {v: k for k, v in theta}
        for la, sa in ta:
            failure = None
            matched = False
            for lb, sb in tb:
                t2 = _match(la, lb, fwd, bwd, theta)
                if t2 is None:
                    continue
                matched = True
                failure = self._check(sa, sb, t2, depth - 1, trace + (la,))
                if failure is None:
                    break
            if not matched:
                return CounterexampleFound(trace + (la,), self.side_a)
            if failure is not None:
                return failure
        for lb, sb in tb:
            if not any(_match(la, lb, fwd, bwd, theta) is not None for la, _ in ta):
                back = {k: v for v, k in theta}
                return CounterexampleFound(trace + (rename_label(lb, back),), self.side_b)
        self.proved[key] = depth
        return None


def _match(la: TransitionLabel, lb: TransitionLabel, fwd, bwd, theta: _Theta) -> Optional[_Theta]:
    """theta extended so that ``la`` renamed by it equals ``lb``, or None."""
    if type(la) is not type(lb):
        return None
    if isinstance(la, Spawned):
        if fwd.get(la.parent, la.parent) != lb.parent:
            return None
        if la.child in fwd or lb.child in bwd:
            return None
        return theta | {(la.child, lb.child)}
    return theta if rename_label(la, fwd) == lb else None


def bounded_bisimulation(
    a: Hashable,
    b: Hashable,
    step_a: Step,
    step_b: Step,
    depth: int,
    sides: Tuple[str, str] = ("left", "right"),
) -> Verdict:
    """Generic bounded strong bisimulation over two labelled transition systems."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    failure = _Product(step_a, step_b, *sides).run(a, b, depth)
    return failure if failure is not None else Bisimilar(depth)


def _net_step(s: NetworkState):
    return enabled_network_transitions(s, strict=False)


def check_bisimulation(n: NetworkState, c: ChorState, depth: int = 12) -> Verdict:
    return bounded_bisimulation(n, c, _net_step, enabled_chor_transitions, depth, ("network", "choreography"))


def check_chor_bisimulation(c1: ChorState, c2: ChorState, depth: int = 12) -> Verdict:
    return bounded_bisimulation(c1, c2, enabled_chor_transitions, enabled_chor_transitions, depth)


# ---------------------------------------------------------------------------
# Canonical spawned names
# ---------------------------------------------------------------------------


def _canonical_map(order: Iterable[ProcessName], taken: Iterable[ProcessName]) -> Dict[ProcessName, ProcessName]:
    taken = set(taken)
    out: Dict[ProcessName, ProcessName] = {}
    k = 0
    for name in order:
        if not is_spawned_name(name) or name in out:
            continue
        while f"s{k}" in taken:
            k += 1
        out[name] = f"s{k}"
        k += 1
    return out


def canonicalize_spawned_names(x):
    """Rename spawned names to s0, s1, ... in order of first appearance.

    Accepts a sequence of labels, a Network or a NetworkState and returns the same kind.
    """
    if isinstance(x, NetworkState):
        order = _network_order(x.network)
        m = _canonical_map(order, _plain_names(order))
        net = _rename_network(x.network, m)
        gamma = VariableMapping.from_dict(
            {(m.get(o, o), m.get(v, v)): m.get(t, t) for (o, v), t in x.gamma.as_dict().items()}
        )
        return NetworkState(net, gamma)
    if isinstance(x, Network):
        order = _network_order(x)
        return _rename_network(x, _canonical_map(order, _plain_names(order)))
    labels = list(x)
    order = [n for label in labels for n in _label_names_in_order(label)]
    m = _canonical_map(order, _plain_names(order))
    out = [rename_label(label, m) for label in labels]
    return tuple(out) if isinstance(x, tuple) else out


def _plain_names(names: Sequence[ProcessName]) -> List[ProcessName]:
    return [n for n in names if not is_spawned_name(n)]


def _label_names_in_order(label: TransitionLabel) -> List[ProcessName]:
    return [getattr(label, f.name) for f in dataclasses.fields(label) if f.name not in ("expr", "label")]


def _network_order(net: Network) -> List[ProcessName]:
    order: List[ProcessName] = []
    for proc in net.processes:
        order.append(proc.name)
        order.extend(sorted(all_names(proc.main)))
    return order


def _rename_network(net: Network, m: Dict[ProcessName, ProcessName]) -> Network:
    if not m:
        return net
    procs = []
    for proc in net.processes:
        defs = tuple(ProcedureDef(d.name, d.params, apply_renaming(d.body, m)) for d in proc.procedures)
        procs.append(Process(m.get(proc.name, proc.name), defs, apply_renaming(proc.main, m), proc.marked))
    return Network(tuple(procs))
