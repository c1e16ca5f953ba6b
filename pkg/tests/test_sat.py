import io
import itertools
import time

import pytest
from hypothesis import given, settings, strategies as st

from conftest import split, view_of, wires
from split3d import corpus
from split3d.metrics import ccr, hamming_distance
from split3d.netlist import parse_bench
from split3d.proximity import true_key
from split3d.rdl import apply_key, public_view
from split3d.sat import (KEY_FOUND, TIMEOUT, CnfFormula, DimacsError, encode_keyed_circuit,
                         export_dimacs, read_dimacs, run_sat_attack, solve_formula, to_dimacs)
from split3d.sat.attack import _Encoder


def brute_force_sat(formula: CnfFormula) -> bool:
    for bits in itertools.product((False, True), repeat=formula.n_vars):
        if formula.evaluate((None,) + bits):
            return True
    return False


clauses = st.lists(st.lists(st.integers(1, 6).flatmap(lambda v: st.sampled_from([v, -v])),
                            min_size=1, max_size=4), max_size=30)


@settings(max_examples=200, deadline=None)
@given(clauses)
def test_solver_agrees_with_brute_force(raw):
    formula = CnfFormula(6)
    for c in raw:
        formula.add_clause(c)
    result, model = solve_formula(formula)
    assert result == brute_force_sat(formula)
    if result:
        assert formula.evaluate(model)


def test_solver_assumptions():
    formula = CnfFormula(2)
    formula.add_clause([1, 2])
    assert solve_formula(formula, [-1, -2])[0] is False
    result, model = solve_formula(formula, [-1])
    assert result and model[2] and not model[1]


def test_pigeonhole_unsat():
    # 5 pigeons, 4 holes
    formula = CnfFormula()
    var = {(p, h): formula.new_var() for p in range(5) for h in range(4)}
    for p in range(5):
        formula.add_clause([var[p, h] for h in range(4)])
    for h in range(4):
        for a, b in itertools.combinations(range(5), 2):
            formula.add_clause([-var[a, h], -var[b, h]])
    assert solve_formula(formula)[0] is False


def test_dimacs_examples():
    f = CnfFormula(2)
    f.add_clause([1, -2])
    assert to_dimacs(f) == "p cnf 2 1\n1 -2 0\n"
    assert to_dimacs(CnfFormula()) == "p cnf 0 0\n"
    buf = io.StringIO()
    export_dimacs(f, buf)
    assert buf.getvalue() == to_dimacs(f)


@settings(max_examples=50, deadline=None)
@given(clauses)
def test_dimacs_round_trip(raw):
    f = CnfFormula(6)
    for c in raw:
        f.add_clause(c)
    back = read_dimacs(to_dimacs(f))
    assert back.n_vars == f.n_vars
    assert sorted(back.clauses) == sorted(f.clauses)


@pytest.mark.parametrize("text", ["1 2 0\n", "p cnf 2 2\n1 2 0\n", "p cnf 2 1\n1 x 0\n",
                                  "p cnf 2 1\n1 2\n", "p dnf 2 1\n1 0\n"])
def test_dimacs_errors(text):
    with pytest.raises(DimacsError):
        read_dimacs(text)


def admissible_keys(kc) -> int:
    """Count key-bit assignments allowed by the key constraints alone."""
    formula = CnfFormula()
    key = {n: formula.new_var(n) for bits in kc.key_bits.values() for n in bits}
    _Encoder(formula).key_constraints(kc, key)
    names = list(key)
    count = 0
    for values in itertools.product((False, True), repeat=len(names)):
        assignment = (None,) + values
        count += formula.evaluate(assignment)
    return count


def test_four_box_key_width(wire_plan):
    _, plan = wire_plan
    kc = encode_keyed_circuit(public_view(plan))
    assert len(kc.boxes) == 1 and kc.key_width == 8
    assert admissible_keys(kc) == 24


def test_three_box_key_width():
    n = parse_bench(wires(3))
    kc = encode_keyed_circuit(public_view(split(n, ["o0", "o1", "o2"], seed=1)))
    assert kc.key_width == 6
    assert admissible_keys(kc) == 6


def test_no_permutation_constraints_widen_the_space(wire_plan):
    _, plan = wire_plan
    kc = encode_keyed_circuit(public_view(plan), permutation=False)
    assert admissible_keys(kc) == 256


def test_zero_boxes():
    n = parse_bench(wires(2))
    plan = split(n, [], seed=0)
    kc = encode_keyed_circuit(public_view(plan))
    assert kc.key_width == 0 and kc.boxes == ()
    key, stats = run_sat_attack(kc, n)
    assert stats.outcome == KEY_FOUND and key == {}


def test_full_mode_rejected():
    with pytest.raises(ValueError):
        encode_keyed_circuit(view_of("c17", mode="full"))


def test_wires_exact_key(wire_plan):
    netlist, plan = wire_plan
    view = public_view(plan)
    # reference: exactly one of the 24 box permutations is functionally correct
    box = view.boxes[0]
    correct = [p for p in itertools.permutations(box.drivers)
               if hamming_distance(netlist, apply_key(view, dict(zip(box.sinks, p))), 256) == 0]
    assert len(correct) == 1
    key, stats = run_sat_attack(encode_keyed_circuit(view), netlist)
    assert stats.outcome == KEY_FOUND
    assert key == plan.key == dict(zip(box.sinks, correct[0]))
    assert ccr(plan.key, key) == 100.0
    assert stats.dips <= 24


def test_tied_drivers_hd_zero():
    text = ("INPUT(i0)\nINPUT(i1)\nINPUT(i2)\nOUTPUT(o0)\nOUTPUT(o1)\nOUTPUT(o2)\nOUTPUT(o3)\n"
            "b0 = BUF(i0)\nb1 = BUF(i0)\nb2 = BUF(i1)\nb3 = BUF(i2)\n"
            "o0 = NOT(b0)\no1 = NOT(b1)\no2 = NOT(b2)\no3 = NOT(b3)\n")
    netlist = parse_bench(text, "tied")
    plan = split(netlist, ["o0", "o1", "o2", "o3"], seed=2)
    view = public_view(plan)
    key, stats = run_sat_attack(encode_keyed_circuit(view), netlist)
    assert stats.outcome == KEY_FOUND
    assert hamming_distance(netlist, apply_key(view, key), 1000) == 0.0
    # both orders of the tied pair are equally valid
    good = [p for p in itertools.permutations(view.boxes[0].drivers)
            if hamming_distance(netlist, apply_key(view, dict(zip(view.boxes[0].sinks, p))),
                                256) == 0]
    assert len(good) == 2


@pytest.mark.parametrize("name", ["c17", "c432"])
def test_sat_attack_recovers_functional_key(name):
    netlist = corpus.load(name)
    view = view_of(name)
    key, stats = run_sat_attack(encode_keyed_circuit(view), netlist)
    assert stats.outcome == KEY_FOUND
    assert hamming_distance(netlist, apply_key(view, key), 10_000, seed=1) == 0.0
    assert stats.to_dict()["dips"] == stats.dips


def test_sat_attack_without_permutation_constraints():
    netlist = corpus.load("c17")
    view = view_of("c17", seed=1)
    key, stats = run_sat_attack(encode_keyed_circuit(view, permutation=False), netlist)
    assert stats.outcome == KEY_FOUND
    assert hamming_distance(netlist, apply_key(view, key), 2000) == 0.0


def test_sat_attack_timeout():
    netlist = corpus.load("c3540")
    kc = encode_keyed_circuit(view_of("c3540"))
    start = time.monotonic()
    key, stats = run_sat_attack(kc, netlist, timeout=1.0)
    assert key is None and stats.outcome == TIMEOUT
    assert time.monotonic() - start < 30


def test_pattern_budget_ends_attack():
    netlist = corpus.load("c432")
    key, stats = run_sat_attack(encode_keyed_circuit(view_of("c432")), netlist, pattern_budget=1)
    assert key is None and stats.outcome == TIMEOUT and stats.dips == 1


def test_oracle_interface_checked(wire_plan):
    _, plan = wire_plan
    with pytest.raises(ValueError):
        run_sat_attack(encode_keyed_circuit(public_view(plan)), corpus.load("c17"))


def test_true_key_is_consistent_with_sat_model():
    netlist = corpus.load("c17")
    view = view_of("c17", seed=2)
    kc = encode_keyed_circuit(view)
    truth = true_key(view, netlist)
    assert set(truth) == set(kc.sinks)
    for sink, driver in truth.items():
        assert driver in kc.candidates(sink)
