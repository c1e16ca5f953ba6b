"""Tier partitioning strategies and cut-set extraction."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .netlist import Netlist
from .sta import TimingInfo, extract_paths

BOTTOM = "bottom"
TOP = "top"
UP = "b2t"    # driver in the bottom tier, sinks in the top tier
DOWN = "t2b"
STRATEGIES = ("random", "maxcut", "timing")


class PartitionError(RuntimeError):
    def __init__(self, message: str, best: "Partition | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class Partition:
    assignment: dict[str, str]
    strategy: str
    move_fraction: float
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def tier(self, gate: str) -> str:
        return self.assignment[gate]

    def gates_in(self, tier: str) -> list[str]:
        return [g for g, t in self.assignment.items() if t == tier]

    @property
    def top_fraction(self) -> float:
        return sum(t == TOP for t in self.assignment.values()) / max(len(self.assignment), 1)


@dataclass(frozen=True)
class Crossing:
    net: str
    driver_tier: str

    @property
    def direction(self) -> str:
        return UP if self.driver_tier == BOTTOM else DOWN


@dataclass(frozen=True)
class CutSet:
    crossings: tuple[Crossing, ...]

    def __len__(self):
        return len(self.crossings)

    def __iter__(self):
        return iter(self.crossings)

    def by_direction(self, direction: str) -> list[Crossing]:
        return [c for c in self.crossings if c.direction == direction]


def cut_size(netlist: Netlist, partition: Partition) -> CutSet:
    """Nets whose driver tier differs from at least one sink's tier, one entry per net.

    Primary inputs are reachable from both tiers through TSVs and never count.
    """
    tiers = partition.assignment
    crossings = []
    for gid in netlist.gates:
        tier = tiers[gid]
        if any(tiers[s] != tier for s in netlist.fanout[gid]):
            crossings.append(Crossing(gid, tier))
    return CutSet(tuple(crossings))


def partition_random(netlist: Netlist, move_fraction: float, seed: int) -> Partition:
    if not 0 <= move_fraction <= 1:
        raise ValueError("move_fraction must lie in [0, 1]")
    gates = list(netlist.gates)
    rng = random.Random(seed)
    top = set(rng.sample(gates, math.floor(move_fraction * len(gates))))
    assignment = {g: TOP if g in top else BOTTOM for g in gates}
    return Partition(assignment, "random", move_fraction, seed)


def partition_maxcut(netlist: Netlist, timing: TimingInfo, move_fraction: float, seed: int,
                     visit_cap: int = 8) -> Partition:
    """Alternate tiers gate by gate along timing paths, most critical paths first.

    Each path starts on a random tier; already-assigned gates keep their tier
    and reset the alternation phase. Once the top quota is filled the rest of
    the design stays in the bottom tier (and vice versa).
    """
    if not 0 <= move_fraction <= 0.5:
        raise ValueError("move_fraction must lie in [0, 0.5]")
    gates = list(netlist.gates)
    rng = random.Random(seed)
    quota = {TOP: math.floor(move_fraction * len(gates))}
    quota[BOTTOM] = len(gates) - quota[TOP]
    count = {TOP: 0, BOTTOM: 0}
    assignment: dict[str, str] = {}

    def place(gate, tier):
        if count[tier] >= quota[tier]:
            tier = BOTTOM if tier == TOP else TOP
        assignment[gate] = tier
        count[tier] += 1
        return tier

    if quota[TOP]:
        # completed over-cap suffixes mostly repeat one upstream chain and would
        # dilute the alternation, so only genuinely branching paths are walked
        paths = extract_paths(netlist, timing, len(gates) * visit_cap, visit_cap, complete=False)
        for path in paths:
            if count[TOP] == quota[TOP] or count[BOTTOM] == quota[BOTTOM]:
                break
            prev = None
            for gate in path.gates:
                if gate in assignment:
                    prev = assignment[gate]
                    continue
                if prev is None:
                    want = TOP if rng.random() < 0.5 else BOTTOM
                else:
                    want = BOTTOM if prev == TOP else TOP
                prev = place(gate, want)

    rest = [g for g in gates if g not in assignment]
    lifted = set(rng.sample(rest, quota[TOP] - count[TOP]))
    for gate in rest:
        assignment[gate] = TOP if gate in lifted else BOTTOM
    ordered = {g: assignment[g] for g in gates}
    return Partition(ordered, "maxcut", move_fraction, seed)


def partition_timing_aware(netlist: Netlist, timing: TimingInfo, balance_eps: float = 0.05,
                           max_iter: int = 32) -> Partition:
    """Keep low-slack gates in the bottom tier and lift the rest.

    The slack threshold is bisected over the distinct slack values until the
    tiers are balanced within ``balance_eps`` (relative to the gate count). When
    a block of equal-slack gates straddles the balance point, the surplus is
    lifted in ascending gate-id order.
    """
    if not 0 < balance_eps < 0.5:
        raise ValueError("balance_eps must lie in (0, 0.5)")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    slack = timing.slack
    gates = list(netlist.gates)
    n = len(gates)
    values = sorted(set(slack.values()))
    tolerance = max(balance_eps * n, n % 2)

    def bottom_count(i):
        return 0 if i < 0 else sum(1 for g in gates if slack[g] <= values[i])

    def build(i, lifted=frozenset(), iterations=0):
        thr = values[i] if i >= 0 else None
        assignment = {
            g: BOTTOM if thr is not None and slack[g] <= thr and g not in lifted else TOP
            for g in gates
        }
        meta = {"threshold": thr, "iterations": iterations, "tie_moves": len(lifted)}
        return Partition(assignment, "timing", 0.5, None, meta)

    def balanced(b):
        return abs(n - 2 * b) <= tolerance

    if n == 0:
        return build(-1)
    lo, hi = -1, len(values) - 1
    best, best_gap = hi, abs(n - 2 * n)
    iterations = 0
    while hi - lo > 1:
        if iterations >= max_iter:
            raise PartitionError(f"no balanced threshold after {max_iter} iterations",
                                 build(best, iterations=iterations))
        iterations += 1
        mid = (lo + hi) // 2
        b = bottom_count(mid)
        if abs(n - 2 * b) < best_gap:
            best, best_gap = mid, abs(n - 2 * b)
        if balanced(b):
            return build(mid, iterations=iterations)
        if 2 * b < n:
            lo = mid
        else:
            hi = mid
    for i in (lo, hi):
        if i >= 0 and balanced(bottom_count(i)):
            return build(i, iterations=iterations)

    # Ties at the threshold make an exact split impossible: lift the surplus.
    b = bottom_count(hi)
    tied = sorted(g for g in gates if slack[g] == values[hi])
    lifted = []
    for gate in tied:
        if balanced(b):
            break
        lifted.append(gate)
        b -= 1
    return build(hi, frozenset(lifted), iterations)


def lifting_fraction(area_ratio: float) -> float:
    """Fraction of gates that can be lifted when each lifted gate costs ``area_ratio`` x area.

    Equal tier areas require ``f * r == 1 - f``.
    """
    if area_ratio <= 0:
        raise ValueError("area ratio must be positive")
    return 1.0 / (1.0 + area_ratio)


def make_partition(netlist: Netlist, strategy: str, *, move_fraction: float = 0.5,
                   seed: int = 0, balance_eps: float = 0.05, max_iter: int = 32,
                   timing: TimingInfo | None = None) -> Partition:
    from .sta import compute_timing

    if strategy == "random":
        return partition_random(netlist, move_fraction, seed)
    timing = timing or compute_timing(netlist)
    if strategy == "maxcut":
        return partition_maxcut(netlist, timing, move_fraction, seed)
    if strategy == "timing":
        return partition_timing_aware(netlist, timing, balance_eps, max_iter)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def partition_to_dict(partition: Partition, cuts: CutSet) -> dict:
    return {
        "strategy": partition.strategy,
        "seed": partition.seed,
        "fraction": partition.move_fraction,
        "top_fraction": partition.top_fraction,
        "assignments": partition.assignment,
        "cut_size": len(cuts),
        "directions": {c.net: c.direction for c in cuts},
        "meta": partition.meta,
    }
