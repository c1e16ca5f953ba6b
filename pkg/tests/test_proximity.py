import itertools
import random
import statistics

import pytest
from hypothesis import given, settings, strategies as st

from conftest import protected, split, view_of
from split3d import corpus
from split3d.netlist import parse_bench
from split3d.proximity import (MatchingError, _local_complete, _Search, box_hits,
                               enumerate_candidates, exclude_loops, find_cycle,
                               run_proximity_attack, true_key)
from split3d.rdl import apply_key, public_view

# the cross-coupled pair plus an independent wire, so the looping sink keeps an alternative
LOOPED = corpus.generate_crosscoupled_pair() + "INPUT(b)\nOUTPUT(q)\np = NOT(b)\nq = NOT(p)\n"


def test_conservative_candidates_are_the_box():
    view = view_of("c432")
    graph = enumerate_candidates(view, "conservative")
    for sink, ranked in graph.candidates.items():
        box = view.box_of(sink)
        assert sorted(d for d, _ in ranked) == sorted(box.drivers)
        assert len(ranked) <= 4
    assert sum(len(r) == 4 for r in graph.candidates.values()) >= len(graph.candidates) - 6


def test_full_mode_candidates():
    view = view_of("c432", mode="full")
    graph = enumerate_candidates(view, "full")
    per_direction = {}
    for d in view.drivers.values():
        per_direction[d.direction] = per_direction.get(d.direction, 0) + 1
    for sink, ranked in graph.candidates.items():
        assert len(ranked) == per_direction[view.sinks[sink].direction]
    with pytest.raises(ValueError):
        enumerate_candidates(view, "conservative")


def test_candidates_contain_truth_and_are_ranked():
    view = view_of("c880", seed=2)
    truth = true_key(view, corpus.load("c880"))
    for mode in ("conservative", "full"):
        graph = enumerate_candidates(view, mode)
        for sink, ranked in graph.candidates.items():
            assert truth[sink] in [d for d, _ in ranked]
            assert [s for _, s in ranked] == sorted(s for _, s in ranked)


def test_unprotected_nearest_is_truth():
    view = view_of("c432", randomize=False, use_switchboxes=False)
    truth = true_key(view, corpus.load("c432"))
    graph = enumerate_candidates(view, "full")
    for sink, ranked in graph.candidates.items():
        assert ranked[0] == (truth[sink], 0.0)


@pytest.mark.parametrize("name", ["c17", "c432", "c880"])
def test_unprotected_attack_is_perfect(name):
    view = view_of(name, randomize=False, use_switchboxes=False)
    result = run_proximity_attack(view, "full", 0, oracle=corpus.load(name))
    assert result.ccr == 100.0 and result.hd == 0.0


def test_true_key_matches_plan_key():
    prot = protected("c1355", "random", 4)
    assert true_key(public_view(prot.plan), corpus.load("c1355")) == prot.plan.key


def test_loop_candidate_excluded():
    n = parse_bench(LOOPED)
    plan = split(n, ["y", "q"], switchboxes=False, randomize=False)
    view = public_view(plan, "full")
    key = plan.key
    d_x = next(d for d, s in view.drivers.items() if s.net == "x")
    d_y = next(d for d, s in view.drivers.items() if s.net == "y")
    sink_y = next(s for s, d in key.items() if d == d_x)   # input of y
    sink_x = next(s for s, d in key.items() if d == d_y)   # input of x
    graph = enumerate_candidates(view, "full", known={sink_x: d_y})
    assert d_x in graph.drivers_of(sink_y)
    pruned = exclude_loops(graph, view)
    assert d_x not in pruned.drivers_of(sink_y)
    assert pruned.drivers_of(sink_y)  # the independent wire's driver survives


def test_acyclic_design_unchanged_by_exclusion():
    view = view_of("c432", seed=5)
    graph = enumerate_candidates(view)
    assert exclude_loops(graph, view).candidates == graph.candidates


def test_find_cycle_detects_direct_loop():
    reach = {"s1": frozenset({"d2"}), "s2": frozenset({"d1"})}
    assert find_cycle({"s1": "d1"}, reach) is None
    cycle = find_cycle({"s1": "d1", "s2": "d2"}, reach)
    assert cycle is not None and set(cycle) >= {"s1", "s2"}


def test_attack_deterministic():
    view = view_of("c880", seed=3)
    a = run_proximity_attack(view, "conservative", 7)
    b = run_proximity_attack(view, "conservative", 7)
    assert a.key == b.key


def test_known_pairs_are_respected():
    view = view_of("c432", seed=1)
    truth = true_key(view, corpus.load("c432"))
    known = dict(list(sorted(truth.items()))[:10])
    result = run_proximity_attack(view, known=known, oracle=corpus.load("c432"))
    assert all(result.key[s] == d for s, d in known.items())


def test_scoring_hook():
    view = view_of("c432", seed=1)
    truth = true_key(view, corpus.load("c432"))
    # a perfect side channel turns the attack into an exact recovery
    cheat = lambda sink, driver: 0.0 if truth[sink.id] == driver.id else 1.0
    result = run_proximity_attack(view, score=cheat, oracle=corpus.load("c432"))
    assert result.ccr == 100.0 and result.hd == 0.0


@pytest.mark.parametrize("name, strategy", [("c432", "timing"), ("c880", "random"),
                                            ("c1355", "maxcut")])
def test_attack_result_invariants(name, strategy):
    n = corpus.load(name)
    for seed in range(3):
        view = view_of(name, strategy, seed)
        result = run_proximity_attack(view, "conservative", seed, oracle=n, n_patterns=2000)
        apply_key(view, result.key)  # acyclic and one-to-one, or this raises
        assert 0 <= result.ccr <= 100 and 0 <= result.hd <= 100
        sizes = [len(b.sinks) for b in view.boxes]
        for size, hits in zip(sizes, result.box_correct):
            assert hits != size - 1 or size == 1
        row = result.to_dict()
        assert row["ccr"] == result.ccr and row["key"] == result.key


def test_full_mode_attack_runs():
    n = corpus.load("c432")
    result = run_proximity_attack(view_of("c432", mode="full"), "full", 0, oracle=n,
                                  n_patterns=2000)
    apply_key(view_of("c432", mode="full"), result.key)
    assert result.box_correct is None and 0 <= result.ccr <= 100


def test_uniform_guessing_oracle():
    # exhaustive: a uniform permutation of four has exactly one fixed point on average
    fixed = [sum(p[i] == i for i in range(4)) for p in itertools.permutations(range(4))]
    assert statistics.fmean(fixed) == 1.0
    assert 3 not in fixed
    rng = random.Random(0)
    hits = []
    for _ in range(2000):
        p = list(range(4))
        rng.shuffle(p)
        hits.append(sum(p[i] == i for i in range(4)))
    assert abs(100 * statistics.fmean(hits) / 4 - 25) <= 2


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 1000))
def test_attack_on_random_plans(plan_seed, attack_seed):
    view = view_of("c432", "random", plan_seed)
    truth = true_key(view, corpus.load("c432"))
    result = run_proximity_attack(view, "conservative", attack_seed)
    apply_key(view, result.key)
    for box, hits in zip(view.boxes, box_hits(view, truth, result.key)):
        if len(box.sinks) == 4:
            assert hits in (0, 1, 2, 4)


def test_local_completion_is_loop_free():
    # maxcut on c1355 strands a large share of sinks after the greedy pass
    view = view_of("c1355", "maxcut", 0)
    graph = exclude_loops(enumerate_candidates(view), view)
    search = _Search(view, graph, random.Random(0))
    stuck = search.greedy()
    assert len(stuck) > 20
    key = _local_complete(view, search, random.Random(0))
    assert key is not None and set(key) == set(view.sinks)
    apply_key(view, key)
    kept = sum(key[s] == d for s, d in search.assigned.items())
    assert kept > len(search.assigned) / 4


def test_retry_cap_raises():
    view = view_of("c1355", "maxcut", 0)
    with pytest.raises(MatchingError):
        run_proximity_attack(view, seed=0, retries=2, attempt_seconds=0.0)
