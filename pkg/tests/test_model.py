import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chorex.model import (
    Call,
    Com,
    Else,
    FreshNameClash,
    Intro,
    Network,
    Process,
    ProcedureDef,
    ProcessRenaming,
    Receive,
    ReceiveIntro,
    Send,
    Spawn,
    Spawned,
    Terminated,
    Then,
    VariableMapping,
    alpha_equal,
    alpha_rename_binder,
    apply_renaming,
    find_equivalence_mapping,
    free_names,
    is_equivalence_mapping,
    label_process_names,
    match_behaviours,
)
from chorex.syntax import parse_behaviour, parse_network
from conftest import load_net
from strategies import networks


def test_apply_renaming_free_name():
    b = Send("store", "item", Terminated())
    assert apply_renaming(b, {"store": "shop"}) == Send("shop", "item", Terminated())


def test_apply_renaming_respects_spawn_binder():
    b = Spawn("w", Send("w", "res", Terminated()), Send("w", "go", Terminated()))
    assert apply_renaming(b, ProcessRenaming.of({"w": "z"})) == b


def test_apply_renaming_under_receive_intro():
    # body of the client's X(s) in the serverless example
    body = load_net("serverless.net")["client"].procedure("X").body
    renamed = apply_renaming(body, {"w": "entry/worker0"})
    assert renamed == body
    assert "w" not in free_names(body)


def test_apply_renaming_avoids_capture():
    b = ReceiveIntro("s", "t", Send("t", "x", Send("u", "y", Terminated())))
    out = apply_renaming(b, {"u": "t"})
    assert isinstance(out, ReceiveIntro)
    assert out.binder != "t"
    assert out.cont == Send(out.binder, "x", Send("t", "y", Terminated()))


def test_alpha_rename_binder():
    b = ReceiveIntro("s", "w", Receive("w", Terminated()))
    assert alpha_rename_binder(b, "w", "worker") == ReceiveIntro("s", "worker", Receive("worker", Terminated()))


def test_alpha_rename_missing_binder_is_identity():
    b = Send("q", "x", Terminated())
    assert alpha_rename_binder(b, "w", "z") == b


def test_alpha_rename_clash():
    b = ReceiveIntro("s", "w", Send("z", "m", Receive("w", Terminated())))
    with pytest.raises(FreshNameClash):
        alpha_rename_binder(b, "w", "z")


@pytest.mark.parametrize(
    "label, names",
    [
        (Com("customer", "item", "store"), {"customer", "store"}),
        (Intro("entry", "entry/worker0", "client"), {"entry", "entry/worker0", "client"}),
        (Then("store", "accepted"), {"store"}),
        (Else("store", "accepted"), {"store"}),
        (Spawned("entry", "entry/worker0"), {"entry", "entry/worker0"}),
    ],
)
def test_label_process_names(label, names):
    assert label_process_names(label) == names


@pytest.mark.parametrize(
    "label, text",
    [
        (Com("p", "e", "q"), "p.e -> q"),
        (Then("p", "e"), "p.e then"),
        (Else("p", "e"), "p.e else"),
        (Intro("p", "q", "r"), "p.q <-> r"),
        (Spawned("p", "p/w0"), "p spawns p/w0"),
    ],
)
def test_label_text(label, text):
    assert str(label) == text


def test_variable_mapping_initial():
    g = VariableMapping.initial(["p", "q", "r"], [("p", "q")])
    assert g.resolve("p", "p") == "p"
    assert g.resolve("p", "q") == "q" and g.resolve("q", "p") == "p"
    assert g.resolve("p", "r") is None


def test_equivalence_reflexive(onlinestore):
    m = find_equivalence_mapping(onlinestore, onlinestore)
    assert m is not None and not m.non_identity()


def test_equivalence_drops_terminated(serverless):
    x = serverless["client"].procedure("X")
    y = serverless["entry"].procedure("X")
    before = Network.of(
        [
            Process("client", (x,), Call("X", ("entry",))),
            Process("entry", (y,), Call("X", ("entry",))),
        ]
    )
    after = Network.of(
        [
            Process("client", (x,), Call("X", ("entry/worker0",))),
            Process("entry", (y,), Terminated()),
            Process("entry/worker0", (y,), Call("X", ("entry/worker0",))),
        ]
    )
    m = find_equivalence_mapping(after, before)
    assert m == ProcessRenaming.of({"client": "client", "entry/worker0": "entry"})


def test_equivalence_absent_for_different_sizes():
    n1 = parse_network("p { main { q!x; 0 } } | q { main { p?; 0 } }")
    n2 = parse_network("p { main { q!x; 0 } } | q { main { p?; 0 } } | r { main { p!y; 0 } }")
    assert find_equivalence_mapping(n1, n2) is None


def test_procedures_use_parameter_respecting_map():
    n1 = parse_network("a { def X(t) { t!m; b!n; 0 } main { X(a) } } | b { main { a?; 0 } }")
    n2 = parse_network("c { def X(t) { t!m; d!n; 0 } main { X(c) } } | d { main { c?; 0 } }")
    assert find_equivalence_mapping(n1, n2) == ProcessRenaming.of({"a": "c", "b": "d"})
    n3 = parse_network("c { def X(t) { t!m; c!n; 0 } main { X(c) } } | d { main { c?; 0 } }")
    assert find_equivalence_mapping(n1, n3) is None


def test_match_behaviours_up_to_alpha():
    a = parse_behaviour("s?w; w!x; 0")
    b = parse_behaviour("r?v; v!x; 0")
    assert match_behaviours(a, b) == [("s", "r")]
    assert alpha_equal(a, apply_renaming(b, {"r": "s"}))


@settings(max_examples=100, deadline=None)
@given(networks(max_depth=3))
def test_identity_renaming_is_identity(n):
    for proc in n.processes:
        assert apply_renaming(proc.main, {}) == proc.main
        assert apply_renaming(proc.main, {name: name for name in n.names}) == proc.main


@settings(max_examples=100, deadline=None)
@given(st.permutations(["u", "v", "w"]), st.permutations(["a", "b", "c"]))
def test_renaming_composition(perm1, perm2):
    b = parse_behaviour("p!x; q?; if e then { r+l; 0 } else { p <-> q; r!y; 0 }")
    m1 = dict(zip(["p", "q", "r"], perm1))
    m2 = dict(zip(["u", "v", "w"], perm2))
    composed = {k: m2[v] for k, v in m1.items()}
    assert apply_renaming(apply_renaming(b, m1), m2) == apply_renaming(b, composed)


def _permute(n: Network, rng: random.Random):
    names = list(n.names)
    targets = [f"n{i}" for i in range(len(names))]
    rng.shuffle(targets)
    m = dict(zip(names, targets))
    procs = []
    for proc in n.processes:
        defs = tuple(ProcedureDef(d.name, d.params, apply_renaming(d.body, m)) for d in proc.procedures)
        procs.append(Process(m[proc.name], defs, apply_renaming(proc.main, m)))
    return Network(tuple(procs)), m


@settings(max_examples=100, deadline=None)
@given(networks(max_depth=3), st.randoms(use_true_random=False))
def test_equivalence_symmetric(n, rng):
    renamed, _ = _permute(n, rng)
    fwd = find_equivalence_mapping(n, renamed)
    back = find_equivalence_mapping(renamed, n)
    assert (fwd is None) == (back is None)
    if fwd is not None:
        assert is_equivalence_mapping(renamed, n, fwd.inverse().map)
