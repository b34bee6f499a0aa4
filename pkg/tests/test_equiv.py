import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chorex.equiv import (
    Bisimilar,
    CounterexampleFound,
    bounded_bisimulation,
    canonicalize_spawned_names,
    check_bisimulation,
    check_chor_bisimulation,
)
from chorex.model import Com, Intro, Sel, Spawned
from chorex.semantics import ChorState, NetworkState, enabled_chor_transitions, enabled_network_transitions
from chorex.synth import extract
from chorex.syntax import parse_choreography, parse_network
from conftest import DATA, load_chor, load_net
from netgen import corpus

GENERATED = corpus(24)


def states(net_name, chor_name):
    net = load_net(net_name)
    return NetworkState.initial(net), ChorState.initial(load_chor(chor_name), net.names)


@pytest.mark.parametrize("name", ["onlinestore", "serverless"])
def test_golden_pairs_are_bisimilar(name):
    n, c = states(f"{name}.net", f"{name}.chor")
    assert check_bisimulation(n, c, 12) == Bisimilar(12)


def test_serverless_deep():
    n, c = states("serverless.net", "serverless.chor")
    assert check_bisimulation(n, c, 30) == Bisimilar(30)


def test_swapped_branches_are_caught():
    n, c = states("onlinestore.net", "onlinestore_mutated.chor")
    verdict = check_bisimulation(n, c, 12)
    assert isinstance(verdict, CounterexampleFound)
    assert verdict.side == "network"
    assert isinstance(verdict.trace[-1], Sel) and verdict.trace[-1].sender == "store"
    _replay(n, verdict.trace[:-1])


def _replay(n, trace):
    s = n
    for label in trace:
        s = dict(enabled_network_transitions(s))[label]
    return s


def test_counterexample_on_choreography_side():
    n = NetworkState.initial(parse_network("p { main { q!x; 0 } } | q { main { p?; 0 } }"))
    c = ChorState.initial(parse_choreography("main { p.x -> q; p.y -> q; 0 }"), ["p", "q"])
    verdict = check_bisimulation(n, c, 5)
    assert verdict == CounterexampleFound((Com("p", "x", "q"), Com("p", "y", "q")), "choreography")


def test_symmetry():
    n, c = states("onlinestore.net", "onlinestore_mutated.chor")
    fwd = check_bisimulation(n, c, 12)
    back = bounded_bisimulation(
        c, n, enabled_chor_transitions, lambda s: enabled_network_transitions(s, strict=False), 12, ("choreography", "network")
    )
    assert isinstance(back, CounterexampleFound)
    assert {fwd.side, back.side} <= {"network", "choreography"}


def test_spawned_names_may_differ():
    n = NetworkState.initial(load_net("serverless.net"))
    text = (DATA / "serverless.chor").read_text()
    c = ChorState.initial(parse_choreography(text.replace("entry/worker0", "entry/helper7")), ["client", "entry"])
    assert isinstance(check_bisimulation(n, c, 16), Bisimilar)


def test_spawn_parents_must_agree():
    n = NetworkState.initial(parse_network("p { main { spawn w with { 0 } continue { 0 } } }"))
    c = ChorState.initial(parse_choreography("main { q spawns q/w; 0 }"), ["p", "q"])
    assert isinstance(check_bisimulation(n, c, 3), CounterexampleFound)


def test_depth_must_be_positive():
    n, c = states("serverless.net", "serverless.chor")
    with pytest.raises(ValueError):
        check_bisimulation(n, c, 0)


@pytest.mark.parametrize("idx", range(0, len(GENERATED), 3))
def test_monotone_in_depth(idx):
    _, net, chor = GENERATED[idx]
    n, c = NetworkState.initial(net), ChorState.initial(chor, net.names)
    for d in range(1, 9):
        assert check_bisimulation(n, c, d) == Bisimilar(d)


def test_counterexample_persists_at_greater_depth():
    n, c = states("onlinestore.net", "onlinestore_mutated.chor")
    first = check_bisimulation(n, c, 12)
    for d in range(len(first.trace), 15):
        assert isinstance(check_bisimulation(n, c, d), CounterexampleFound)
    assert isinstance(check_bisimulation(n, c, len(first.trace) - 1), Bisimilar)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, len(GENERATED) - 1), st.integers(1, 10))
def test_extraction_is_bisimilar(idx, depth):
    _, net, _ = GENERATED[idx]
    chor, _ = extract(net)
    c = ChorState.initial(chor, net.names)
    assert check_bisimulation(NetworkState.initial(net), c, depth) == Bisimilar(depth)
    assert check_chor_bisimulation(c, c, depth) == Bisimilar(depth)


# -- canonical spawned names -------------------------------------------------


def test_canonicalize_labels():
    trace = [Spawned("entry", "entry/worker0"), Intro("entry", "entry/worker0", "client"), Com("entry/worker0", "res", "client")]
    assert canonicalize_spawned_names(trace) == [
        Spawned("entry", "s0"),
        Intro("entry", "s0", "client"),
        Com("s0", "res", "client"),
    ]


def test_canonicalize_skips_existing_names():
    trace = (Com("s0", "x", "p"), Spawned("p", "p/w1"))
    assert canonicalize_spawned_names(trace) == (Com("s0", "x", "p"), Spawned("p", "s1"))


def test_canonicalize_network():
    n = parse_network("p { main { 0 } } | p/w3 { main { p!x; 0 } }")
    out = canonicalize_spawned_names(n)
    assert out.names == ("p", "s0")
    assert canonicalize_spawned_names(out) == out


def _trace(step, s, steps):
    out = []
    for _ in range(steps):
        ts = step(s)
        if not ts:
            break
        label, s = ts[-1]
        out.append(label)
    return out


def test_canonicalize_makes_network_and_choreography_traces_equal():
    n, _ = states("serverless.net", "serverless.chor")
    text = (DATA / "serverless.chor").read_text()
    c = ChorState.initial(parse_choreography(text.replace("entry/worker0", "entry/job")), ["client", "entry"])
    a = _trace(enabled_network_transitions, n, 14)
    b = _trace(enabled_chor_transitions, c, 14)
    assert a != b
    assert canonicalize_spawned_names(a) == canonicalize_spawned_names(b)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, len(GENERATED) - 1), st.integers(0, 30))
def test_canonicalize_idempotent(idx, steps):
    _, net, _ = GENERATED[idx]
    s = NetworkState.initial(net)
    trace = _trace(enabled_network_transitions, s, steps)
    once = canonicalize_spawned_names(trace)
    assert canonicalize_spawned_names(once) == once
    s = _replay(s, trace)
    once = canonicalize_spawned_names(s)
    assert canonicalize_spawned_names(once) == once
