import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from split3d import corpus
from split3d.metrics import ccr, hamming_distance, log10_factorial, solution_space
from split3d.netlist import parse_bench


def test_ccr_examples():
    key = {"s1": "d1", "s2": "d2", "s3": "d3", "s4": "d4"}
    assert ccr(key, key) == 100.0
    assert ccr(key, {"s1": "d2", "s2": "d1", "s3": "d4", "s4": "d3"}) == 0.0
    with pytest.raises(ValueError):
        ccr(key, {"s1": "d1"})


def test_single_box_ccr_values():
    drivers = ["d0", "d1", "d2", "d3"]
    truth = {f"s{j}": drivers[j] for j in range(4)}
    values = {ccr(truth, {f"s{j}": drivers[p[j]] for j in range(4)})
              for p in itertools.permutations(range(4))}
    assert values == {0.0, 25.0, 50.0, 100.0}


@settings(max_examples=50)
@given(st.dictionaries(st.text(min_size=1, max_size=4), st.text(max_size=4), max_size=12))
def test_ccr_reflexive(key):
    assert ccr(key, key) == 100.0


def test_hd_identity_and_inversion():
    n = corpus.load("c432")
    assert hamming_distance(n, n, 5000, 3) == 0.0
    a = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(x)\nOUTPUT(y)\nx = AND(a, b)\ny = OR(a, b)\n")
    b = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(x)\nOUTPUT(y)\nx = AND(a, b)\ny = NOR(a, b)\n")
    assert hamming_distance(a, b, 1000, 0) == 50.0


def test_hd_symmetric_and_deterministic():
    a = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(x)\nx = AND(a, b)\n")
    b = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(x)\nx = OR(a, b)\n")
    hd = hamming_distance(a, b, 4000, 7)
    assert hd == hamming_distance(b, a, 4000, 7) == hamming_distance(a, b, 4000, 7)
    assert 45 < hd < 55  # differ on half the input space


def test_hd_interface_mismatch():
    a = parse_bench("INPUT(a)\nOUTPUT(x)\nx = NOT(a)\n")
    b = parse_bench("INPUT(b)\nOUTPUT(x)\nx = NOT(b)\n")
    with pytest.raises(ValueError):
        hamming_distance(a, b)


def test_solution_space_examples():
    assert solution_space(2, 3).log10_count == pytest.approx(math.log10(12))
    sb = solution_space(8, 4, True)
    assert sb.log10_count == pytest.approx(math.log10(48), abs=1e-6)
    assert sb.log10_count_per_box == pytest.approx(math.log10(24 ** 3 * 2))
    assert solution_space(0, 0).log10_count == 0.0
    with pytest.raises(ValueError):
        solution_space(6, 4, True)
    with pytest.raises(ValueError):
        solution_space(-1, 4)


def test_solution_space_exact_up_to_12():
    for d_bot in range(13):
        for d_top in range(13):
            exact = math.factorial(d_bot) * math.factorial(d_top)
            assert solution_space(d_bot, d_top).log10_count == pytest.approx(math.log10(exact),
                                                                             abs=1e-9)
            if d_bot % 4 == 0 and d_top % 4 == 0:
                exact = 24 * math.factorial(d_bot // 4) * math.factorial(d_top // 4)
                assert solution_space(d_bot, d_top, True).log10_count == pytest.approx(
                    math.log10(exact), abs=1e-9)


@settings(max_examples=60)
@given(st.integers(0, 5000), st.integers(0, 5000))
def test_solution_space_monotone_and_large(d_bot, d_top):
    base = solution_space(d_bot, d_top).log10_count
    assert base >= 0
    assert solution_space(d_bot + 1, d_top).log10_count >= base
    assert solution_space(d_bot, d_top + 1).log10_count >= base


def test_log_gamma_branch_is_continuous():
    assert log10_factorial(171) == pytest.approx(log10_factorial(170) + math.log10(171))
    assert log10_factorial(33_417) > 100_000
