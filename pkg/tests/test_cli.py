import subprocess
import sys

import pytest

from chorex.cli import load_topology, main
from chorex.syntax import parse_choreography, print_choreography
from conftest import DATA, load_chor


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_extract_online_store(capsys):
    code, out, err = run(capsys, "extract", DATA / "onlinestore.net")
    assert code == 0 and err == ""
    assert parse_choreography(out).main.procedure == "X1"


def test_extract_serverless_matches_golden(capsys):
    code, out, _ = run(capsys, "extract", DATA / "serverless.net")
    assert code == 0
    assert out.rstrip("\n") == print_choreography(load_chor("serverless.chor")).rstrip("\n")


def test_extract_to_file_with_dot_and_check(capsys, tmp_path):
    out_file, dot_file = tmp_path / "s.chor", tmp_path / "s.dot"
    code, out, err = run(capsys, "extract", DATA / "serverless.net", "-o", out_file, "--dot", dot_file, "--check")
    assert code == 0 and out == ""
    assert "check: Bisimilar(12)" in err
    assert "entry/worker0 -> entry" in dot_file.read_text()
    assert parse_choreography(out_file.read_text()) == load_chor("serverless.chor")


@pytest.mark.parametrize(
    "name, code, kind",
    [
        ("leak1.net", 3, "ResourceLeak"),
        ("leak2.net", 3, "ResourceLeak"),
        ("chain.net", 4, "NoValidLoop"),
        ("deadlock.net", 2, "Deadlock"),
    ],
)
def test_extract_failures(capsys, name, code, kind):
    got, out, err = run(capsys, "extract", DATA / name)
    assert got == code and out == ""
    assert kind in err


@pytest.mark.parametrize("policy", ["lex", "lex-max", "hash"])
def test_seed_policy(capsys, policy):
    code, out, _ = run(capsys, "extract", DATA / "onlinestore.net", "--seed-policy", policy, "--check")
    assert code == 0 and out


def test_budget_flag_and_environment(capsys, monkeypatch):
    code, _, err = run(capsys, "extract", DATA / "serverless.net", "--node-budget", "2")
    assert code == 4 and "BudgetExhausted" in err
    monkeypatch.setenv("CHOREX_NODE_BUDGET", "2")
    assert run(capsys, "extract", DATA / "serverless.net")[0] == 4
    monkeypatch.setenv("CHOREX_NODE_BUDGET", "lots")
    assert run(capsys, "extract", DATA / "serverless.net")[0] == 64


def test_parse_error(capsys, tmp_path):
    bad = tmp_path / "bad.net"
    bad.write_text("p { main { q! } }")
    code, _, err = run(capsys, "extract", bad)
    assert code == 1
    assert f"{bad}:1:" in err


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "extract", tmp_path / "missing.net")[0] == 64
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 64
    with pytest.raises(SystemExit) as info:
        main(["check", str(DATA / "serverless.net"), str(DATA / "serverless.chor"), "--depth", "0"])
    assert info.value.code == 64


def test_topology(capsys, tmp_path):
    topo = tmp_path / "t.txt"
    topo.write_text("# initial links\ncustomer -- store  // both ways\n\n")
    assert load_topology(str(topo)) == [("customer", "store")]
    assert run(capsys, "extract", DATA / "onlinestore.net", "--topology", topo)[0] == 0
    topo.write_text("")
    code, _, err = run(capsys, "extract", DATA / "onlinestore.net", "--topology", topo)
    assert code == 2 and "unbound" in err
    topo.write_text("customer -- nobody\n")
    assert run(capsys, "extract", DATA / "onlinestore.net", "--topology", topo)[0] == 64
    topo.write_text("customer store\n")
    assert run(capsys, "extract", DATA / "onlinestore.net", "--topology", topo)[0] == 64


def test_check_command(capsys):
    code, out, _ = run(capsys, "check", DATA / "onlinestore.net", DATA / "onlinestore.chor")
    assert code == 0 and out.strip() == "Bisimilar(12)"
    code, out, _ = run(capsys, "check", DATA / "onlinestore.net", DATA / "onlinestore_mutated.chor", "--depth", "8")
    assert code == 5
    lines = out.splitlines()
    assert lines[0] == "counterexample (network side):"
    assert lines[-1].strip().startswith("store -> customer[")


def test_simulate(capsys):
    code, out, _ = run(capsys, "simulate", DATA / "serverless.net", "--steps", "3")
    assert code == 0
    labels = out.split("\n\n")[0].splitlines()
    assert labels == ["client.req -> entry", "entry spawns entry/worker0", "entry.entry/worker0 <-> client"]
    assert "entry/worker0 {" in out


def test_simulate_alternate_terminates(capsys):
    code, out, _ = run(capsys, "simulate", DATA / "onlinestore.net", "--steps", "40", "--alternate")
    assert code == 0
    labels = out.split("\n\n")[0].splitlines()
    assert labels[1] == "customer.checkout then"
    assert "store.accepted else" in labels and labels[-2] == "store.accepted then"
    assert out.count("main {\n        0\n    }") == 2


def test_simulate_deadlock(capsys):
    code, out, err = run(capsys, "simulate", DATA / "deadlock.net")
    assert code == 2 and "deadlock" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "chorex", "extract", str(DATA / "onlinestore.net")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0 and "def X1()" in proc.stdout
