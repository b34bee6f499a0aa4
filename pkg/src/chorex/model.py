"""ASTs for processes and choreographies, plus the renamings used to compare networks."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

ProcessName = str


def normalize_expr(text: str) -> str:
    return " ".join(text.split())


def is_spawned_name(name: ProcessName) -> bool:
    return "/" in name


# ---------------------------------------------------------------------------
# Behaviours
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Terminated:
    pass


@dataclass(frozen=True)
class Call:
    procedure: str
    args: Tuple[ProcessName, ...] = ()


@dataclass(frozen=True)
class Send:
    to: ProcessName
    expr: str
    cont: "Behaviour"


@dataclass(frozen=True)
class Receive:
    frm: ProcessName
    cont: "Behaviour"


@dataclass(frozen=True)
class Select:
    to: ProcessName
    label: str
    cont: "Behaviour"


@dataclass(frozen=True)
class Offer:
    frm: ProcessName
    branches: Tuple[Tuple[str, "Behaviour"], ...]

    def branch(self, label: str) -> Optional["Behaviour"]:
        for name, body in self.branches:
            if name == label:
                return body
        return None


@dataclass(frozen=True)
class Introduce:
    left: ProcessName
    right: ProcessName
    cont: "Behaviour"


@dataclass(frozen=True)
class ReceiveIntro:
    frm: ProcessName
    binder: ProcessName
    cont: "Behaviour"


@dataclass(frozen=True)
class Conditional:
    expr: str
    then: "Behaviour"
    else_: "Behaviour"


@dataclass(frozen=True)
class Spawn:
    """Create a child running ``child``; ``binder`` names the child in both ``child`` and ``cont``."""

    binder: ProcessName
    child: "Behaviour"
    cont: "Behaviour"


Behaviour = Union[
    Terminated, Call, Send, Receive, Select, Offer, Introduce, ReceiveIntro, Conditional, Spawn
]

TERMINATED = Terminated()


@dataclass(frozen=True)
class ProcedureDef:
    name: str
    params: Tuple[ProcessName, ...]
    body: Behaviour


@dataclass(frozen=True)
class Process:
    name: ProcessName
    procedures: Tuple[ProcedureDef, ...]
    main: Behaviour
    marked: bool = False

    def procedure(self, name: str) -> Optional[ProcedureDef]:
        for proc in self.procedures:
            if proc.name == name:
                return proc
        return None

    @property
    def terminated(self) -> bool:
        return isinstance(self.main, Terminated)


@dataclass(frozen=True)
class Network:
    """Processes kept sorted by name so that equal networks compare and hash equal."""

    processes: Tuple[Process, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.processes, key=lambda p: p.name))
        object.__setattr__(self, "processes", ordered)

    @classmethod
    def of(cls, processes: Iterable[Process]) -> "Network":
        return cls(tuple(processes))

    @property
    def names(self) -> Tuple[ProcessName, ...]:
        return tuple(p.name for p in self.processes)

    @property
    def live_names(self) -> Tuple[ProcessName, ...]:
        return tuple(p.name for p in self.processes if not p.terminated)

    def get(self, name: ProcessName) -> Optional[Process]:
        for proc in self.processes:
            if proc.name == name:
                return proc
        return None

    def __getitem__(self, name: ProcessName) -> Process:
        proc = self.get(name)
        if proc is None:
            raise KeyError(name)
        return proc

    def __contains__(self, name: object) -> bool:
        return self.get(name) is not None  # type: ignore[arg-type]

    def replace(self, updates: Mapping[ProcessName, Process]) -> "Network":
        kept = [p for p in self.processes if p.name not in updates]
        return Network(tuple(kept) + tuple(updates.values()))

    @property
    def is_terminated(self) -> bool:
        return all(p.terminated for p in self.processes)


# ---------------------------------------------------------------------------
# Variable mapping (gamma)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariableMapping:
    """Partial map from (owner, local variable) to an actual process name."""

    entries: FrozenSet[Tuple[Tuple[ProcessName, ProcessName], ProcessName]] = frozenset()
    _index: Dict[Tuple[ProcessName, ProcessName], ProcessName] = field(
        default=None, compare=False, hash=False, repr=False  # type: ignore[assignment]
    )

    def __post_init__(self):
        object.__setattr__(self, "_index", dict(self.entries))

    @classmethod
    def from_dict(cls, d: Mapping[Tuple[ProcessName, ProcessName], ProcessName]) -> "VariableMapping":
        return cls(frozenset(d.items()))

    @classmethod
    def initial(
        cls,
        names: Iterable[ProcessName],
        connections: Optional[Iterable[Tuple[ProcessName, ProcessName]]] = None,
    ) -> "VariableMapping":
        """Identity on every process, plus ``(p,q) -> q`` for each connected pair (complete by default)."""
        names = list(names)
        d: Dict[Tuple[str, str], str] = {(p, p): p for p in names}
        if connections is None:
            connections = [(p, q) for p in names for q in names if p != q]
        for p, q in connections:
            d[(p, q)] = q
            d[(q, p)] = p
        return cls.from_dict(d)

    def resolve(self, owner: ProcessName, var: ProcessName) -> Optional[ProcessName]:
        return self._index.get((owner, var))

    def updated(self, changes: Mapping[Tuple[ProcessName, ProcessName], ProcessName]) -> "VariableMapping":
        d = dict(self._index)
        d.update(changes)
        return VariableMapping.from_dict(d)

    def as_dict(self) -> Dict[Tuple[ProcessName, ProcessName], ProcessName]:
        return dict(self._index)

    def __iter__(self) -> Iterator[Tuple[Tuple[ProcessName, ProcessName], ProcessName]]:
        return iter(sorted(self._index.items()))


# ---------------------------------------------------------------------------
# Transition labels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Com:
    sender: ProcessName
    expr: str
    receiver: ProcessName

    def __str__(self) -> str:
        return f"{self.sender}.{self.expr} -> {self.receiver}"


@dataclass(frozen=True)
class Sel:
    sender: ProcessName
    receiver: ProcessName
    label: str

    def __str__(self) -> str:
        return f"{self.sender} -> {self.receiver}[{self.label}]"


@dataclass(frozen=True)
class Then:
    process: ProcessName
    expr: str

    def __str__(self) -> str:
        return f"{self.process}.{self.expr} then"


@dataclass(frozen=True)
class Else:
    process: ProcessName
    expr: str

    def __str__(self) -> str:
        return f"{self.process}.{self.expr} else"


@dataclass(frozen=True)
class Intro:
    introducer: ProcessName
    left: ProcessName
    right: ProcessName

    def __str__(self) -> str:
        return f"{self.introducer}.{self.left} <-> {self.right}"


@dataclass(frozen=True)
class Spawned:
    parent: ProcessName
    child: ProcessName

    def __str__(self) -> str:
        return f"{self.parent} spawns {self.child}"


TransitionLabel = Union[Com, Sel, Then, Else, Intro, Spawned]


def label_process_names(label: TransitionLabel) -> FrozenSet[ProcessName]:
    if isinstance(label, Com):
        return frozenset((label.sender, label.receiver))
    if isinstance(label, Sel):
        return frozenset((label.sender, label.receiver))
    if isinstance(label, (Then, Else)):
        return frozenset((label.process,))
    if isinstance(label, Intro):
        return frozenset((label.introducer, label.left, label.right))
    if isinstance(label, Spawned):
        return frozenset((label.parent, label.child))
    raise TypeError(f"not a transition label: {label!r}")


def rename_label(label: TransitionLabel, m: Mapping[ProcessName, ProcessName]) -> TransitionLabel:
    r = lambda n: m.get(n, n)  # noqa: E731
    if isinstance(label, Com):
        return Com(r(label.sender), label.expr, r(label.receiver))
    if isinstance(label, Sel):
        return Sel(r(label.sender), r(label.receiver), label.label)
    if isinstance(label, Then):
        return Then(r(label.process), label.expr)
    if isinstance(label, Else):
        return Else(r(label.process), label.expr)
    if isinstance(label, Intro):
        return Intro(r(label.introducer), r(label.left), r(label.right))
    return Spawned(r(label.parent), r(label.child))


# ---------------------------------------------------------------------------
# Process renamings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessRenaming:
    pairs: Tuple[Tuple[ProcessName, ProcessName], ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted(self.pairs)))

    @classmethod
    def of(cls, m: Mapping[ProcessName, ProcessName]) -> "ProcessRenaming":
        return cls(tuple(m.items()))

    @property
    def map(self) -> Dict[ProcessName, ProcessName]:
        return dict(self.pairs)

    @property
    def domain(self) -> FrozenSet[ProcessName]:
        return frozenset(k for k, _ in self.pairs)

    @property
    def codomain(self) -> FrozenSet[ProcessName]:
        return frozenset(v for _, v in self.pairs)

    def __call__(self, name: ProcessName) -> ProcessName:
        return self.map.get(name, name)

    def non_identity(self) -> Dict[ProcessName, ProcessName]:
        return {k: v for k, v in self.pairs if k != v}

    @property
    def injective(self) -> bool:
        return len(self.codomain) == len(self.pairs)

    def inverse(self) -> "ProcessRenaming":
        if not self.injective:
            raise ValueError("renaming is not injective")
        return ProcessRenaming(tuple((v, k) for k, v in self.pairs))

    def __str__(self) -> str:
        inner = ", ".join(f"{k} -> {v}" for k, v in self.pairs)
        return "{" + inner + "}"


# ---------------------------------------------------------------------------
# Choreographies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CTerminated:
    pass


@dataclass(frozen=True)
class CCall:
    procedure: str
    args: Tuple[ProcessName, ...] = ()


@dataclass(frozen=True)
class CCom:
    sender: ProcessName
    expr: str
    receiver: ProcessName
    cont: "ChorBody"


@dataclass(frozen=True)
class CSel:
    sender: ProcessName
    receiver: ProcessName
    label: str
    cont: "ChorBody"


@dataclass(frozen=True)
class CCond:
    process: ProcessName
    expr: str
    then: "ChorBody"
    else_: "ChorBody"


@dataclass(frozen=True)
class CSpawn:
    """``parent spawns child; cont`` -- ``child`` is bound in ``cont``."""

    parent: ProcessName
    child: ProcessName
    cont: "ChorBody"


@dataclass(frozen=True)
class CIntro:
    introducer: ProcessName
    left: ProcessName
    right: ProcessName
    cont: "ChorBody"


ChorBody = Union[CTerminated, CCall, CCom, CSel, CCond, CSpawn, CIntro]
CTERMINATED = CTerminated()


@dataclass(frozen=True)
class ChorProcedure:
    name: str
    params: Tuple[ProcessName, ...]
    body: ChorBody


@dataclass(frozen=True)
class Choreography:
    procedures: Tuple[ChorProcedure, ...]
    main: ChorBody

    def procedure(self, name: str) -> Optional[ChorProcedure]:
        for proc in self.procedures:
            if proc.name == name:
                return proc
        return None


# ---------------------------------------------------------------------------
# Names, substitution, alpha-renaming
# ---------------------------------------------------------------------------


class FreshNameClash(ValueError):
    pass


def free_names(b: Behaviour) -> FrozenSet[ProcessName]:
    if isinstance(b, Terminated):
        return frozenset()
    if isinstance(b, Call):
        return frozenset(b.args)
    if isinstance(b, Send):
        return free_names(b.cont) | {b.to}
    if isinstance(b, Receive):
        return free_names(b.cont) | {b.frm}
    if isinstance(b, Select):
        return free_names(b.cont) | {b.to}
    if isinstance(b, Offer):
        out = frozenset({b.frm})
        for _, body in b.branches:
            out |= free_names(body)
        return out
    if isinstance(b, Introduce):
        return free_names(b.cont) | {b.left, b.right}
    if isinstance(b, ReceiveIntro):
        return (free_names(b.cont) - {b.binder}) | {b.frm}
    if isinstance(b, Conditional):
        return free_names(b.then) | free_names(b.else_)
    if isinstance(b, Spawn):
        return (free_names(b.child) | free_names(b.cont)) - {b.binder}
    raise TypeError(f"not a behaviour: {b!r}")


def all_names(b: Behaviour) -> FrozenSet[ProcessName]:
    """Free and bound process names occurring anywhere in ``b``."""
    if isinstance(b, ReceiveIntro):
        return all_names(b.cont) | {b.frm, b.binder}
    if isinstance(b, Spawn):
        return all_names(b.child) | all_names(b.cont) | {b.binder}
    if isinstance(b, Offer):
        out = frozenset({b.frm})
        for _, body in b.branches:
            out |= all_names(body)
        return out
    if isinstance(b, Conditional):
        return all_names(b.then) | all_names(b.else_)
    if isinstance(b, Introduce):
        return all_names(b.cont) | {b.left, b.right}
    return free_names(b) | (all_names(b.cont) if hasattr(b, "cont") else frozenset())


def binders(b: Behaviour) -> List[ProcessName]:
    """Binder names in pre-order."""
    out: List[ProcessName] = []

    def walk(x: Behaviour) -> None:
        if isinstance(x, ReceiveIntro):
            out.append(x.binder)
            walk(x.cont)
        elif isinstance(x, Spawn):
            out.append(x.binder)
            walk(x.child)
            walk(x.cont)
        elif isinstance(x, Offer):
            for _, body in x.branches:
                walk(body)
        elif isinstance(x, Conditional):
            walk(x.then)
            walk(x.else_)
        elif isinstance(x, (Send, Receive, Select, Introduce)):
            walk(x.cont)

    walk(b)
    return out


_SUFFIX = re.compile(r"_\d+$")


def fresh_variant(base: ProcessName, avoid: Iterable[ProcessName]) -> ProcessName:
    avoid = set(avoid)
    stem = _SUFFIX.sub("", base)
    k = 1
    while f"{stem}_{k}" in avoid:
        k += 1
    return f"{stem}_{k}"


def apply_renaming(b: Behaviour, m: Union[ProcessRenaming, Mapping[ProcessName, ProcessName]]) -> Behaviour:
    """Capture-avoiding simultaneous substitution of free process names.

    Binders (and whatever they shadow) are left alone. If a binder would
    capture a substituted name it is alpha-renamed first.
    """
    if isinstance(m, ProcessRenaming):
        m = m.map
    m = {k: v for k, v in m.items() if k != v}
    if not m:
        return b
    return _subst(b, m)


def _subst(b: Behaviour, m: Dict[ProcessName, ProcessName]) -> Behaviour:
    r = lambda n: m.get(n, n)  # noqa: E731
    if isinstance(b, Terminated):
        return b
    if isinstance(b, Call):
        return Call(b.procedure, tuple(r(a) for a in b.args))
    if isinstance(b, Send):
        return Send(r(b.to), b.expr, _subst(b.cont, m))
    if isinstance(b, Receive):
        return Receive(r(b.frm), _subst(b.cont, m))
    if isinstance(b, Select):
        return Select(r(b.to), b.label, _subst(b.cont, m))
    if isinstance(b, Offer):
        return Offer(r(b.frm), tuple((lbl, _subst(body, m)) for lbl, body in b.branches))
    if isinstance(b, Introduce):
        return Introduce(r(b.left), r(b.right), _subst(b.cont, m))
    if isinstance(b, Conditional):
        return Conditional(b.expr, _subst(b.then, m), _subst(b.else_, m))
    if isinstance(b, ReceiveIntro):
        binder, (cont,) = _enter_binder(b.binder, (b.cont,), m)
        inner = {k: v for k, v in m.items() if k != binder}
        return ReceiveIntro(r(b.frm), binder, _subst(cont, inner) if inner else cont)
    if isinstance(b, Spawn):
        binder, (child, cont) = _enter_binder(b.binder, (b.child, b.cont), m)
        inner = {k: v for k, v in m.items() if k != binder}
        if not inner:
            return Spawn(binder, child, cont)
        return Spawn(binder, _subst(child, inner), _subst(cont, inner))
    raise TypeError(f"not a behaviour: {b!r}")


def _enter_binder(binder, scopes, m):
    inner = {k: v for k, v in m.items() if k != binder}
    used = frozenset()
    for s in scopes:
        used |= free_names(s)
    captured = any(v == binder and k in used for k, v in inner.items())
    if not captured:
        return binder, scopes
    avoid = set(m) | set(m.values())
    for s in scopes:
        avoid |= all_names(s)
    fresh = fresh_variant(binder, avoid)
    return fresh, tuple(_subst(s, {binder: fresh}) for s in scopes)


def alpha_rename_binder(b: Behaviour, old: ProcessName, fresh: ProcessName) -> Behaviour:
    """Rename every binder ``old`` in ``b`` (and the occurrences it binds) to ``fresh``."""
    if fresh in all_names(b):
        raise FreshNameClash(f"name {fresh!r} already occurs in the behaviour")
    return _alpha(b, old, fresh)


def _alpha(b: Behaviour, old: ProcessName, fresh: ProcessName) -> Behaviour:
    if isinstance(b, ReceiveIntro):
        if b.binder == old:
            return ReceiveIntro(b.frm, fresh, _subst(_alpha(b.cont, old, fresh), {old: fresh}))
        return ReceiveIntro(b.frm, b.binder, _alpha(b.cont, old, fresh))
    if isinstance(b, Spawn):
        child, cont = _alpha(b.child, old, fresh), _alpha(b.cont, old, fresh)
        if b.binder == old:
            return Spawn(fresh, _subst(child, {old: fresh}), _subst(cont, {old: fresh}))
        return Spawn(b.binder, child, cont)
    if isinstance(b, Send):
        return Send(b.to, b.expr, _alpha(b.cont, old, fresh))
    if isinstance(b, Receive):
        return Receive(b.frm, _alpha(b.cont, old, fresh))
    if isinstance(b, Select):
        return Select(b.to, b.label, _alpha(b.cont, old, fresh))
    if isinstance(b, Introduce):
        return Introduce(b.left, b.right, _alpha(b.cont, old, fresh))
    if isinstance(b, Offer):
        return Offer(b.frm, tuple((lbl, _alpha(x, old, fresh)) for lbl, x in b.branches))
    if isinstance(b, Conditional):
        return Conditional(b.expr, _alpha(b.then, old, fresh), _alpha(b.else_, old, fresh))
    return b


def distinct_binders(b: Behaviour) -> Behaviour:
    """Alpha-rename so that no two binders in ``b`` share a name."""
    seen = set()
    avoid = set(all_names(b))

    def walk(x: Behaviour) -> Behaviour:
        if isinstance(x, (ReceiveIntro, Spawn)):
            binder = x.binder
            if binder in seen:
                fresh = fresh_variant(binder, avoid)
                avoid.add(fresh)
                if isinstance(x, ReceiveIntro):
                    x = ReceiveIntro(x.frm, fresh, _subst(x.cont, {binder: fresh}))
                else:
                    x = Spawn(fresh, _subst(x.child, {binder: fresh}), _subst(x.cont, {binder: fresh}))
                binder = fresh
            seen.add(binder)
            if isinstance(x, ReceiveIntro):
                return ReceiveIntro(x.frm, x.binder, walk(x.cont))
            child = walk(x.child)
            return Spawn(x.binder, child, walk(x.cont))
        if isinstance(x, Send):
            return Send(x.to, x.expr, walk(x.cont))
        if isinstance(x, Receive):
            return Receive(x.frm, walk(x.cont))
        if isinstance(x, Select):
            return Select(x.to, x.label, walk(x.cont))
        if isinstance(x, Introduce):
            return Introduce(x.left, x.right, walk(x.cont))
        if isinstance(x, Offer):
            return Offer(x.frm, tuple((lbl, walk(body)) for lbl, body in x.branches))
        if isinstance(x, Conditional):
            return Conditional(x.expr, walk(x.then), walk(x.else_))
        return x

    return walk(b)


# ---------------------------------------------------------------------------
# Structural matching under a renaming
# ---------------------------------------------------------------------------


def match_behaviours(a: Behaviour, b: Behaviour) -> Optional[List[Tuple[ProcessName, ProcessName]]]:
    """Match ``a`` against ``b`` up to alpha-equivalence.

    Returns the list of (free name in ``a``, free name in ``b``) occurrence
    pairs that a renaming must respect, or None if the shapes differ.
    """
    pairs: List[Tuple[ProcessName, ProcessName]] = []
    if _match(a, b, {}, {}, pairs):
        return pairs
    return None


def _match(a, b, env_a, env_b, pairs) -> bool:
    if type(a) is not type(b):
        return False

    def name(x, y):
        bx, by = env_a.get(x), env_b.get(y)
        if bx is not None or by is not None:
            return bx == by
        pairs.append((x, y))
        return True

    def bind(xa, xb):
        na, nb = dict(env_a), dict(env_b)
        token = next(_BOUND)
        na[xa] = token
        nb[xb] = token
        return na, nb

    if isinstance(a, Terminated):
        return True
    if isinstance(a, Call):
        if a.procedure != b.procedure or len(a.args) != len(b.args):
            return False
        return all(name(x, y) for x, y in zip(a.args, b.args))
    if isinstance(a, Send):
        return normalize_expr(a.expr) == normalize_expr(b.expr) and name(a.to, b.to) and _match(
            a.cont, b.cont, env_a, env_b, pairs
        )
    if isinstance(a, Receive):
        return name(a.frm, b.frm) and _match(a.cont, b.cont, env_a, env_b, pairs)
    if isinstance(a, Select):
        return a.label == b.label and name(a.to, b.to) and _match(a.cont, b.cont, env_a, env_b, pairs)
    if isinstance(a, Offer):
        if [l for l, _ in a.branches] != [l for l, _ in b.branches] or not name(a.frm, b.frm):
            return False
        return all(_match(x, y, env_a, env_b, pairs) for (_, x), (_, y) in zip(a.branches, b.branches))
    if isinstance(a, Introduce):
        return name(a.left, b.left) and name(a.right, b.right) and _match(a.cont, b.cont, env_a, env_b, pairs)
    if isinstance(a, Conditional):
        return (
            normalize_expr(a.expr) == normalize_expr(b.expr)
            and _match(a.then, b.then, env_a, env_b, pairs)
            and _match(a.else_, b.else_, env_a, env_b, pairs)
        )
    if isinstance(a, ReceiveIntro):
        if not name(a.frm, b.frm):
            return False
        na, nb = bind(a.binder, b.binder)
        return _match(a.cont, b.cont, na, nb, pairs)
    if isinstance(a, Spawn):
        na, nb = bind(a.binder, b.binder)
        return _match(a.child, b.child, na, nb, pairs) and _match(a.cont, b.cont, na, nb, pairs)
    raise TypeError(f"not a behaviour: {a!r}")


_BOUND = itertools.count()


def alpha_equal(a: Behaviour, b: Behaviour) -> bool:
    pairs = match_behaviours(a, b)
    return pairs is not None and all(x == y for x, y in pairs)


def shape(b: Behaviour) -> str:
    """A string identifying ``b`` up to renaming of every process name."""
    counter = [0]

    def walk(x, env) -> str:
        n = lambda v: env.get(v, "#")  # noqa: E731
        if isinstance(x, Terminated):
            return "0"
        if isinstance(x, Call):
            return f"{x.procedure}({','.join(n(a) for a in x.args)})"
        if isinstance(x, Send):
            return f"{n(x.to)}!{normalize_expr(x.expr)};{walk(x.cont, env)}"
        if isinstance(x, Receive):
            return f"{n(x.frm)}?;{walk(x.cont, env)}"
        if isinstance(x, Select):
            return f"{n(x.to)}+{x.label};{walk(x.cont, env)}"
        if isinstance(x, Offer):
            inner = ",".join(f"{l}:{walk(body, env)}" for l, body in x.branches)
            return f"{n(x.frm)}&{{{inner}}}"
        if isinstance(x, Introduce):
            return f"{n(x.left)}<->{n(x.right)};{walk(x.cont, env)}"
        if isinstance(x, Conditional):
            return f"if {normalize_expr(x.expr)}{{{walk(x.then, env)}}}{{{walk(x.else_, env)}}}"
        if isinstance(x, ReceiveIntro):
            counter[0] += 1
            inner = dict(env, **{x.binder: f"@{counter[0]}"})
            return f"{n(x.frm)}?@{counter[0]};{walk(x.cont, inner)}"
        if isinstance(x, Spawn):
            counter[0] += 1
            inner = dict(env, **{x.binder: f"@{counter[0]}"})
            return f"spawn@{counter[0]}{{{walk(x.child, inner)}}}{{{walk(x.cont, inner)}}}"
        raise TypeError(x)

    return walk(b, {})


# ---------------------------------------------------------------------------
# Network equivalence
# ---------------------------------------------------------------------------


def iter_network_mappings(
    n1: Network,
    n2: Network,
    injective: bool = True,
    surjective: bool = True,
) -> Iterator[Dict[ProcessName, ProcessName]]:
    """Yield renamings of the live processes of ``n1`` onto live processes of ``n2``.

    Each yielded map M satisfies, for every live p: main(M(p)) equals M(main(p))
    up to alpha-equivalence, and every procedure X(q)=B of p appears in M(p) as
    M_q(B). Names outside the domain map to themselves and must not collide with
    the codomain. Candidates are tried in lexicographic order.
    """
    dom = list(n1.live_names)
    cod = list(n2.live_names)
    if injective and surjective and len(dom) != len(cod):
        return
    if injective and len(dom) > len(cod):
        return
    if surjective and len(dom) < len(cod):
        return
    dom_set, cod_set = set(dom), set(cod)
    shapes2: Dict[str, List[str]] = {}
    for q in cod:
        shapes2.setdefault(shape(n2[q].main), []).append(q)
    options = {p: shapes2.get(shape(n1[p].main), []) for p in dom}
    if any(not opts for opts in options.values()):
        return
    matches: Dict[Tuple[str, str], Optional[List[Tuple[str, str]]]] = {}

    def pairs_for(p: str, q: str):
        key = (p, q)
        if key not in matches:
            matches[key] = match_behaviours(n1[p].main, n2[q].main)
        return matches[key]

    def consistent(m: Dict[str, str], pairs) -> Optional[List[str]]:
        """Extend m with forced pairs; returns newly assigned names or None on conflict."""
        added: List[str] = []
        for x, y in pairs:
            if x in dom_set:
                cur = m.get(x)
                if cur is None:
                    if y not in options[x] or (injective and y in m.values()):
                        for a in added:
                            del m[a]
                        return None
                    m[x] = y
                    added.append(x)
                elif cur != y:
                    for a in added:
                        del m[a]
                    return None
            elif x != y or y in cod_set:
                for a in added:
                    del m[a]
                return None
        return added

    order = sorted(dom, key=lambda p: (len(options[p]), p))

    def search(m: Dict[str, str]) -> Iterator[Dict[str, str]]:
        pending = [p for p in order if p not in m]
        # verify behaviour pairs of assigned processes whose constraints might be unchecked
        if not pending:
            if surjective and set(m.values()) != cod_set:
                return
            if not _procedures_ok(n1, n2, m, dom_set, cod_set):
                return
            yield dict(m)
            return
        p = pending[0]
        for q in sorted(options[p]):
            if injective and q in m.values():
                continue
            m[p] = q
            ok, added = _propagate(m, [p], pairs_for, consistent)
            if ok:
                yield from search(m)
            for a in added:
                m.pop(a, None)
            m.pop(p, None)

    yield from search({})


def _propagate(m, queue, pairs_for, consistent):
    added_all: List[str] = []
    queue = list(queue)
    while queue:
        p = queue.pop()
        pairs = pairs_for(p, m[p])
        if pairs is None:
            for a in added_all:
                m.pop(a, None)
            return False, []
        added = consistent(m, pairs)
        if added is None:
            for a in added_all:
                m.pop(a, None)
            return False, []
        added_all.extend(added)
        queue.extend(added)
    return True, added_all


def _procedures_ok(n1: Network, n2: Network, m, dom_set, cod_set) -> bool:
    for p, q in m.items():
        proc_p, proc_q = n1[p], n2[q]
        if len(proc_p.procedures) != len(proc_q.procedures):
            return False
        for d in proc_p.procedures:
            other = proc_q.procedure(d.name)
            if other is None or len(other.params) != len(d.params):
                return False
            pairs = match_behaviours(d.body, other.body)
            if pairs is None:
                return False
            local = dict(zip(d.params, other.params))
            for x, y in pairs:
                if x in local:
                    if local[x] != y:
                        return False
                elif x in dom_set:
                    if m[x] != y:
                        return False
                elif x != y or y in cod_set:
                    return False
    return True


def find_equivalence_mapping(n1: Network, n2: Network) -> Optional[ProcessRenaming]:
    """First bijection (lexicographic search) between the live processes of two equivalent networks."""
    for m in iter_network_mappings(n1, n2):
        return ProcessRenaming.of(m)
    return None


def is_equivalence_mapping(n1: Network, n2: Network, m: Mapping[ProcessName, ProcessName]) -> bool:
    dom, cod = set(n1.live_names), set(n2.live_names)
    if set(m) != dom or set(m.values()) != cod or len(set(m.values())) != len(m):
        return False
    for p, q in m.items():
        pairs = match_behaviours(n1[p].main, n2[q].main)
        if pairs is None:
            return False
        for x, y in pairs:
            if m.get(x, x) != y or (x not in dom and y in cod):
                return False
    return _procedures_ok(n1, n2, dict(m), dom, cod)
