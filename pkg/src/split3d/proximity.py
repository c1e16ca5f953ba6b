"""Proximity attack on a split F2F stack with an obfuscated RDL.

The attacker holds both tiers (gates, dangling F2F stubs and their coordinates)
but not the RDL. Heuristics applied:

* one-to-one: every driver stub feeds exactly one sink stub, primary I/Os are
  known and never candidates;
* proximity: candidates are ranked by via distance (an optional scoring hook
  can fold in other layout hints, known-IP pairs can be pinned up front);
* loops: a connection that would close a combinational cycle through the two
  tiers is dropped.
"""

from __future__ import annotations

import heapq
import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .metrics import DEFAULT_PATTERNS, ccr, hamming_distance
from .netlist import Netlist
from .partition import BOTTOM, TOP
from .rdl import MODES, PublicView, Stub, apply_key

ScoreFn = Callable[[Stub, Stub], float]


class MatchingError(RuntimeError):
    pass


def euclidean(sink: Stub, driver: Stub) -> float:
    return math.dist(sink.point, driver.point)


@dataclass
class CandidateGraph:
    mode: str
    candidates: dict[str, list[tuple[str, float]]]
    fixed: dict[str, str] = field(default_factory=dict)

    def drivers_of(self, sink: str) -> list[str]:
        return [d for d, _ in self.candidates[sink]]


def enumerate_candidates(view: PublicView, mode: str = "conservative",
                         score: ScoreFn | None = None,
                         known: Mapping[str, str] | None = None) -> CandidateGraph:
    """Per sink stub, the same-direction driver stubs it could be wired to, nearest first.

    In conservative mode the candidates are confined to the sink's switchbox.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "conservative" and view.boxes and not view.has_membership:
        raise ValueError("a full-mode view carries no switchbox membership")
    score = score or euclidean
    by_direction: dict[str, list[Stub]] = {}
    for stub in view.drivers.values():
        by_direction.setdefault(stub.direction, []).append(stub)

    candidates = {}
    for sink in view.sinks.values():
        if mode == "conservative" and view.has_membership:
            pool = [view.drivers[d] for d in view.box_of(sink.id).drivers]
        else:
            pool = by_direction.get(sink.direction, [])
        ranked = sorted(((d.id, score(sink, d)) for d in pool), key=lambda c: (c[1], c[0]))
        candidates[sink.id] = ranked
    fixed = dict(known or {})
    for sink, driver in fixed.items():
        if driver not in {d for d, _ in candidates.get(sink, [])}:
            raise ValueError(f"known pair {sink!r} <- {driver!r} is not a candidate")
    return CandidateGraph(mode, candidates, fixed)


class _Connectivity:
    """Reachability over both tiers plus the committed stub connections."""

    def __init__(self, view: PublicView):
        self.readers: dict[str, list[str]] = {}
        self.inputs: dict[str, tuple[str, ...]] = {}
        for tier in (BOTTOM, TOP):
            for gate in view.tiers[tier]:
                self.inputs[gate.id] = gate.inputs
                for net in dict.fromkeys(gate.inputs):
                    self.readers.setdefault(net, []).append(gate.id)
        self.stub_of_net = {s.net: s.id for s in view.drivers.values()}
        self.net_of_stub = {s.id: s.net for s in view.drivers.values()}
        self.sinks = set(view.sinks)
        self.forward: dict[str, str] = {}   # driver stub -> committed sink stub
        self.backward: dict[str, str] = {}  # sink stub -> committed driver stub

    def commit(self, sink: str, driver: str):
        self.forward[driver] = sink
        self.backward[sink] = driver

    def rollback(self, sink: str, driver: str):
        del self.forward[driver]
        del self.backward[sink]

    def downstream_drivers(self, sink: str) -> set[str]:
        """Driver stubs whose nets are reachable from ``sink``."""
        found = set()
        seen = set()
        stack = list(self.readers.get(sink, ()))
        while stack:
            gate = stack.pop()
            if gate in seen:
                continue
            seen.add(gate)
            stack.extend(self.readers.get(gate, ()))
            driver = self.stub_of_net.get(gate)
            if driver is not None:
                found.add(driver)
                nxt = self.forward.get(driver)
                if nxt is not None:
                    stack.extend(self.readers.get(nxt, ()))
        return found

    def upstream_sinks(self, driver: str) -> set[str]:
        """Sink stubs from which the net behind ``driver`` is reachable."""
        found = set()
        seen = set()
        stack = [self.net_of_stub[driver]]
        while stack:
            gate = stack.pop()
            if gate in seen:
                continue
            seen.add(gate)
            for net in self.inputs.get(gate, ()):
                if net in self.sinks:
                    found.add(net)
                    prev = self.backward.get(net)
                    if prev is not None:
                        stack.append(self.net_of_stub[prev])
                elif net in self.inputs:
                    stack.append(net)
        return found


def find_cycle(key: Mapping[str, str], reach: Mapping[str, frozenset[str]]) -> list[str] | None:
    """Sinks on a combinational loop closed by ``key``, or None if the key is loop-free."""
    sink_of = {d: s for s, d in key.items()}
    succ = {s: sorted(sink_of[d] for d in reach.get(s, ()) if d in sink_of) for s in key}
    color = dict.fromkeys(key, 0)
    for root in key:
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        path = [root]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                color[node] = 2
            elif color[nxt] == 1:
                return path[path.index(nxt):]
            elif color[nxt] == 0:
                color[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(succ[nxt])))
    return None


def exclude_loops(graph: CandidateGraph, view: PublicView) -> CandidateGraph:
    """Drop every candidate that would close a cycle given the fixed connections."""
    conn = _Connectivity(view)
    for sink, driver in graph.fixed.items():
        conn.commit(sink, driver)
    pruned = {}
    for sink, ranked in graph.candidates.items():
        if sink in graph.fixed:
            pruned[sink] = ranked
            continue
        closing = conn.downstream_drivers(sink)
        pruned[sink] = [(d, s) for d, s in ranked if d not in closing]
    return CandidateGraph(graph.mode, pruned, dict(graph.fixed))


@dataclass
class AttackResult:
    key: dict[str, str]
    mode: str
    seed: int
    runtime: float
    repairs: int = 0
    ccr: float | None = None
    hd: float | None = None
    box_correct: list[int] | None = None
    benchmark: str = ""

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark, "attack": "proximity", "mode": self.mode,
            "seed": self.seed, "runtime": self.runtime, "repairs": self.repairs,
            "ccr": self.ccr, "hd": self.hd, "box_correct": self.box_correct, "key": self.key,
        }


def _perfect_matching(options: Mapping[str, list[str]]) -> bool:
    """Whether every sink in ``options`` can get its own driver (Kuhn's algorithm)."""
    owner: dict[str, str] = {}

    def augment(sink, seen):
        for driver in options[sink]:
            if driver in seen:
                continue
            seen.add(driver)
            if driver not in owner or augment(owner[driver], seen):
                owner[driver] = sink
                return True
        return False

    return all(augment(sink, set()) for sink in options)


class _Search:
    """State of one greedy matching pass: assignments, used drivers, banned pairs."""

    def __init__(self, view: PublicView, graph: CandidateGraph, rng: random.Random):
        self.view = view
        self.graph = graph
        self.conn = _Connectivity(view)
        self.assigned: dict[str, str] = {}
        self.used: set[str] = set()
        self.banned: dict[str, set[str]] = {s: set() for s in graph.candidates}
        self.ban_source: dict[tuple[str, str], str] = {}
        self.order: list[str] = []
        self.boxed = graph.mode == "conservative" and view.has_membership
        self.pairs = [(score, rng.random(), sink, driver)
                            for sink, ranked in graph.candidates.items()
                            for driver, score in ranked]

    def legal(self, sink, driver):
        return (sink not in self.assigned and driver not in self.used
                and driver not in self.banned[sink])

    def options(self, sink):
        return [d for d, _ in self.graph.candidates[sink] if self.legal(sink, d)]

    def completable(self, sinks):
        if not self.boxed:
            return all(self.options(s) for s in sinks if s not in self.assigned)
        boxes = {self.view.membership[s] for s in sinks}
        for box_id in boxes:
            box = self.view._boxes_by_id[box_id]
            open_sinks = [s for s in box.sinks if s not in self.assigned]
            if not _perfect_matching({s: self.options(s) for s in open_sinks}):
                return False
        return True

    def commit(self, sink, driver):
        """Apply a connection; returns the undo record and the sinks whose options shrank."""
        self.assigned[sink] = driver
        self.used.add(driver)
        self.conn.commit(sink, driver)
        closing = self.conn.downstream_drivers(sink)
        added = {}
        for upstream in self.conn.upstream_sinks(driver):
            if upstream not in self.assigned:
                new = closing - self.banned[upstream]
                if new:
                    self.banned[upstream] |= new
                    added[upstream] = new
                    for d in new:
                        self.ban_source[upstream, d] = sink
        self.order.append(sink)
        return (sink, driver, added), [sink, *added]

    def undo(self, record):
        sink, driver, added = record
        for upstream, new in added.items():
            self.banned[upstream] -= new
        del self.assigned[sink]
        self.used.discard(driver)
        self.conn.rollback(sink, driver)
        self.order.pop()

    def greedy(self) -> list[str]:
        """One matching pass; returns the sinks left without a driver."""
        for sink, driver in self.graph.fixed.items():
            self.commit(sink, driver)
        heap = list(self.pairs)
        heapq.heapify(heap)
        while heap:
            _, _, sink, driver = heapq.heappop(heap)
            if self.legal(sink, driver):
                self.try_commit(sink, driver)
        return sorted(s for s in self.graph.candidates if s not in self.assigned)

    def try_commit(self, sink, driver) -> bool:
        record, touched = self.commit(sink, driver)
        if self.completable(touched):
            return True
        self.undo(record)
        self.banned[sink].add(driver)
        self.ban_source[sink, driver] = sink
        return False

    def unit(self, sink):
        return self.view.membership[sink] if self.boxed else sink

    def unit_sinks(self, unit):
        return list(self.view._boxes_by_id[unit].sinks) if self.boxed else [unit]

    def culprits(self, units):
        """Units whose commits banned options of sinks in ``units``."""
        found = set()
        for unit in units:
            for sink in self.unit_sinks(unit):
                for driver in self.banned[sink]:
                    source = self.ban_source.get((sink, driver))
                    if source is not None and source in self.assigned:
                        found.add(self.unit(source))
        return found - set(units)

    def solve(self, sinks: list[str], budget: int) -> bool:
        """Exhaustive search over the open ``sinks``, most constrained sink first,
        nearest driver first; keeps the first complete assignment found."""
        nodes = 0

        def step(open_sinks):
            nonlocal nodes
            if not open_sinks:
                return True
            sink = min(open_sinks, key=lambda x: (len(self.options(x)), x))
            rest = [x for x in open_sinks if x != sink]
            for driver in self.options(sink):
                nodes += 1
                if nodes > budget:
                    return False
                record, touched = self.commit(sink, driver)
                if self.completable(touched) and step(rest):
                    return True
                self.undo(record)
            return False

        return step(list(sinks))


def _rebuild(view, graph, rng, search: _Search, units) -> tuple[_Search, list[str]]:
    """Fresh state holding every connection outside ``units``; returns it and the open sinks."""
    fresh = _Search(view, graph, rng)
    for sink in search.order:
        if sink in graph.fixed or search.unit(sink) not in units:
            fresh.commit(sink, search.assigned[sink])
    released = sorted(s for s in graph.candidates if s not in fresh.assigned)
    return fresh, released


def _strong_components(nodes, succ) -> list[list]:
    """Strongly connected components (iterative Kosaraju), in a deterministic order."""
    order, seen = [], set()
    for root in nodes:
        if root in seen:
            continue
        seen.add(root)
        stack = [(root, iter(succ.get(root, ())))]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                order.append(node)
            elif nxt not in seen:
                seen.add(nxt)
                stack.append((nxt, iter(succ.get(nxt, ()))))
    pred: dict = {}
    for u in nodes:
        for v in succ.get(u, ()):
            pred.setdefault(v, []).append(u)
    comps, assigned = [], set()
    for root in reversed(order):
        if root in assigned:
            continue
        comp, stack = [], [root]
        assigned.add(root)
        while stack:
            node = stack.pop()
            comp.append(node)
            for prev in pred.get(node, ()):
                if prev not in assigned:
                    assigned.add(prev)
                    stack.append(prev)
        comps.append(comp)
    return comps


def _static_reach(view: PublicView) -> dict[str, frozenset[str]]:
    conn = _Connectivity(view)
    return {s: frozenset(conn.downstream_drivers(s)) for s in view.sinks}


def _looped(key: Mapping[str, str], reach, upstream) -> set[str]:
    """Sinks lying on some loop closed by ``key``."""
    succ: dict[str, list[str]] = {}
    for t, d in key.items():
        for s in upstream.get(d, ()):
            succ.setdefault(s, []).append(t)
    bad = {s for s, d in key.items() if d in reach[s]}
    for comp in _strong_components(sorted(key), succ):
        if len(comp) > 1:
            bad.update(comp)
    return bad


def _local_complete(view: PublicView, search: _Search, rng: random.Random,
                    deadline: float | None = None, steps: int = 20_000,
                    noise: float = 0.1, sample: int = 9) -> dict[str, str] | None:
    """Loop-free complete key by min-conflicts search, or None.

    Stranded sinks first take their nearest free candidates, loops allowed.
    Then a sink on a loop repeatedly swaps drivers with the member of its
    switchbox (or, without boxes, its direction) that leaves the fewest sinks
    on loops; worsening swaps are taken only with probability ``noise``.
    Known connections never move.
    """
    graph = search.graph
    reach = _static_reach(view)
    upstream: dict[str, list[str]] = {}
    for s in sorted(view.sinks):
        for d in reach[s]:
            upstream.setdefault(d, []).append(s)
    allowed = {s: {d for d, _ in ranked} for s, ranked in graph.candidates.items()}

    def group(sink):
        return search.unit(sink) if search.boxed else view.sinks[sink].direction

    groups: dict = {}
    for sink in sorted(graph.candidates):
        if sink not in graph.fixed:
            groups.setdefault(group(sink), []).append(sink)
    key = dict(search.assigned)
    taken = set(search.used)
    for sink in sorted(graph.candidates):
        if sink not in key:
            free = [(score, d) for d, score in graph.candidates[sink] if d not in taken]
            if not free:
                return None
            key[sink] = min(free)[1]
            taken.add(key[sink])

    def swap(a, b):
        key[a], key[b] = key[b], key[a]

    def partners(sink):
        members = groups[group(sink)]
        return [t for t in rng.sample(members, min(len(members), sample))
                if t != sink and key[t] in allowed[sink] and key[sink] in allowed[t]]

    def best_swap(sink):
        best = None
        for t in partners(sink):
            swap(sink, t)
            after = _looped(key, reach, upstream)
            swap(sink, t)
            if best is None or len(after) < len(best[0]):
                best = (after, [(sink, t)])
        return best

    bad = _looped(key, reach, upstream)
    for _ in range(steps):
        if not bad:
            return key
        if deadline is not None and time.monotonic() > deadline:
            return None
        sink = rng.choice(sorted(bad - graph.fixed.keys()))
        best = best_swap(sink)
        if best is not None and (len(best[0]) <= len(bad) or rng.random() < noise):
            for a, b in best[1]:
                swap(a, b)
            bad = best[0]
    return None


def _exact_complete(view: PublicView, search: _Search, sinks: list[str],
                    first_depth: int = 16, deadline: float | None = None) -> bool:
    """Complete ``sinks`` one-to-one and loop-free with the SAT solver.

    Sinks that could sit on a loop get a level in ``0..depth-1`` (order
    encoding) and every possible sink-to-sink dependency forces a strictly
    higher level downstream, so any model is loop-free. Small depths are tried
    first and doubled on failure up to the size of the largest tangle, where
    the encoding becomes complete. The solver is nudged towards each sink's
    nearest driver; distance is otherwise ignored. Gives up (returns False)
    once the monotonic ``deadline`` passes.
    """
    released = set(sinks)
    reach = _static_reach(view)
    upstream: dict[str, list[str]] = {}
    for s in sorted(view.sinks):
        for d in reach[s]:
            upstream.setdefault(d, []).append(s)
    # possible dependencies s -> t: None when t is already connected, else the choices of t causing it
    causes: dict[tuple[str, str], list[tuple[str, str]] | None] = {}
    for t in sorted(view.sinks):
        if t in search.assigned:
            for s in upstream.get(search.assigned[t], ()):
                causes[s, t] = None
        elif t in released:
            for d in search.options(t):
                for s in upstream.get(d, ()):
                    entry = causes.setdefault((s, t), [])
                    if entry is not None:
                        entry.append((t, d))
    succ: dict[str, list[str]] = {}
    for s, t in causes:
        succ.setdefault(s, []).append(t)
    component = {}
    largest = 1
    for i, comp in enumerate(_strong_components(sorted(view.sinks), succ)):
        largest = max(largest, len(comp))
        for node in comp:
            component[node] = i if len(comp) > 1 else None

    depth = min(first_depth, largest)
    while True:
        chosen = _complete_with_depth(search, sinks, causes, component, depth, deadline)
        if chosen is not None:
            break
        if depth >= largest or (deadline is not None and time.monotonic() > deadline):
            return False
        depth = min(2 * depth, largest)
    for s in sinks:
        search.commit(s, chosen[s])
    return True


def _complete_with_depth(search: _Search, sinks, causes, component, depth: int,
                         deadline: float | None = None):
    from .sat.solver import Solver

    solver = Solver()
    var = {(s, d): solver.new_var() for s in sinks for d in search.options(s)}
    by_driver: dict[str, list[int]] = {}
    for s in sinks:
        lits = [var[s, d] for d in search.options(s)]
        if lits:
            solver.set_phase(lits[0], True)
        solver.add_clause(lits)
        for i, a in enumerate(lits):
            for b in lits[i + 1:]:
                solver.add_clause([-a, -b])
    for (s, d), v in var.items():
        by_driver.setdefault(d, []).append(v)
    for lits in by_driver.values():
        for i, a in enumerate(lits):
            for b in lits[i + 1:]:
                solver.add_clause([-a, -b])

    # at_least[node][k] <=> level(node) >= k + 1, for k in 0..depth-2
    at_least: dict[str, list[int]] = {}
    for node, comp in component.items():
        if comp is not None:
            ladder = [solver.new_var() for _ in range(depth - 1)]
            for hi, lo in zip(ladder[1:], ladder):
                solver.add_clause([-hi, lo])
            at_least[node] = ladder
    for (s, t), choices in causes.items():
        if s == t:
            for choice in choices or ():
                solver.add_clause([-var[choice]])
            continue
        if component[s] is None or component[s] != component[t]:
            continue
        guards = [[]] if choices is None else [[-var[c]] for c in choices]
        ls, lt = at_least[s], at_least[t]
        for guard in guards:
            # level(t) >= level(s) + 1
            solver.add_clause(guard + ([lt[0]] if lt else []))
            for k in range(depth - 1):
                nxt = [lt[k + 1]] if k + 1 < depth - 1 else []
                solver.add_clause(guard + [-ls[k]] + nxt)
    if not solver.solve(deadline=deadline):
        return None
    return {s: d for (s, d), v in var.items() if solver.value(v)}


def _repair(view, graph, rng, search: _Search, stuck: list[str], budget: int = 2_000,
            rings: int = 2, local_steps: int = 3_000, sat_seconds: float = 5.0,
            deadline: float | None = None) -> tuple[dict[str, str], int]:
    """Complete the greedy matching around stranded sinks; returns the key and the round count.

    The stranded box is released and searched nearest-first while every other
    connection stays, then again together with the boxes whose connections
    banned its options, a few rings out. If that still fails, the whole key is
    completed by local search from the greedy result; failing that, the exact
    SAT completion gets ``sat_seconds`` before a longer local search. Raises MatchingError when nothing is found before
    ``deadline``.
    """
    rounds = 0
    while stuck:
        rounds += 1
        units = {search.unit(stuck[0])}
        for _ in range(rings + 1):
            fresh, released = _rebuild(view, graph, rng, search, units)
            if fresh.solve(released, budget):
                break
            units = units | search.culprits(units)
        else:
            key = _local_complete(view, search, rng, deadline, steps=local_steps)
            if key is None:
                every = {search.unit(s) for s in graph.candidates}
                fresh, released = _rebuild(view, graph, rng, search, every)
                cap = time.monotonic() + sat_seconds
                if _exact_complete(view, fresh, released,
                                   deadline=cap if deadline is None else min(cap, deadline)):
                    key = dict(fresh.assigned)
                else:
                    key = _local_complete(view, search, rng, deadline, steps=10 * local_steps)
            if key is None:
                raise MatchingError("no loop-free one-to-one completion found")
            return key, rounds
        search = fresh
        stuck = sorted(s for s in graph.candidates if s not in search.assigned)
    return dict(search.assigned), rounds


def run_proximity_attack(view: PublicView, mode: str = "conservative", seed: int = 0, *,
                         score: ScoreFn | None = None, known: Mapping[str, str] | None = None,
                         oracle: Netlist | None = None,
                         n_patterns: int = DEFAULT_PATTERNS, retries: int = 3,
                         attempt_seconds: float = 20.0) -> AttackResult:
    """Greedy global matching of sink stubs to driver stubs by increasing distance.

    The globally closest legal pair is committed first; after each commit any
    pair that would now close a loop is banned. Equal distances are broken by a
    seeded random draw. A commit that would leave some switchbox without any
    complete one-to-one assignment is retracted and its pair banned. If sinks
    still end up stranded, the switchboxes around them (the stranded box and
    the boxes whose connections banned its options) are released and re-solved
    nearest-first while all other connections stay; local search over the
    whole key is the last resort. Each attempt gets ``attempt_seconds``; a
    failed attempt restarts with a fresh tie-break seed, and MatchingError is
    raised after ``retries`` attempts. When ``oracle`` is given the recovered
    netlist is scored (CCR, HD, per-box hits) against it.
    """
    start = time.perf_counter()
    graph = exclude_loops(enumerate_candidates(view, mode, score, known), view)
    rng = random.Random(seed)
    for attempt in range(retries):
        deadline = time.monotonic() + attempt_seconds
        search = _Search(view, graph, rng)
        stuck = search.greedy()
        try:
            key, repairs = _repair(view, graph, rng, search, stuck, deadline=deadline)
            break
        except MatchingError:
            if attempt == retries - 1:
                raise
    runtime = time.perf_counter() - start
    result = AttackResult(key, mode, seed, runtime, repairs, benchmark=view.name)
    if oracle is not None:
        score_recovery(result, view, oracle, n_patterns, seed)
    return result


def true_key(view: PublicView, original: Netlist) -> dict[str, str]:
    """Recover the correct pairing by comparing the tiers against the original design."""
    stub_of_net = {s.net: s.id for s in view.drivers.values()}
    key = {}
    for tier in (BOTTOM, TOP):
        for gate in view.tiers[tier]:
            original_inputs = original.gates[gate.id].inputs
            for net, orig in zip(gate.inputs, original_inputs):
                if net in view.sinks:
                    key[net] = stub_of_net[orig]
    return key


def box_hits(view: PublicView, truth: Mapping[str, str], key: Mapping[str, str]) -> list[int]:
    return [sum(key[s] == truth[s] for s in box.sinks) for box in view.boxes
            if box.sinks is not None]


def score_recovery(result: AttackResult, view: PublicView, oracle: Netlist,
                   n_patterns: int = DEFAULT_PATTERNS, seed: int = 0) -> AttackResult:
    truth = true_key(view, oracle)
    recovered = apply_key(view, result.key)
    result.ccr = ccr(truth, result.key)
    result.hd = hamming_distance(oracle, recovered, n_patterns, seed)
    result.box_correct = box_hits(view, truth, result.key) if view.has_membership else None
    return result
