"""Unit-delay static timing analysis: arrival, required time, slack and critical paths."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

from .netlist import Netlist


@dataclass(frozen=True)
class TimingInfo:
    arrival: dict[str, int]
    required: dict[str, int]
    critical_delay: int

    @property
    def slack(self) -> dict[str, int]:
        return {g: self.required[g] - self.arrival[g] for g in self.arrival}

    def to_json(self) -> str:
        return json.dumps({"critical_delay": self.critical_delay, "slack": self.slack},
                          indent=2, sort_keys=True)


@dataclass(frozen=True)
class TimingPath:
    """Gates from the launching input to an output, in signal order."""

    source: str
    gates: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.gates)


def compute_timing(netlist: Netlist) -> TimingInfo:
    """Every gate costs one unit of delay; wires are free.

    Required times are anchored at the global worst output arrival, so all
    slacks are non-negative and the critical gates have slack zero.
    """
    arrival = dict.fromkeys(netlist.inputs, 0)
    for gid in netlist.order:
        arrival[gid] = 1 + max((arrival[n] for n in netlist.gates[gid].inputs), default=0)
    delay = max((arrival[o] for o in netlist.outputs), default=0)

    required: dict[str, int] = {}
    fanout = netlist.fanout
    outputs = netlist.output_set
    for gid in reversed(netlist.order):
        sinks = fanout[gid]
        req = min((required[s] - 1 for s in sinks), default=delay)
        if gid in outputs:
            req = min(req, delay)
        required[gid] = req
    gates = netlist.gates
    return TimingInfo({g: arrival[g] for g in gates}, {g: required[g] for g in gates}, delay)


def extract_paths(netlist: Netlist, timing: TimingInfo, k: int,
                  visit_cap: int = 8, complete: bool = True) -> list[TimingPath]:
    """Up to ``k`` longest input-to-output paths, most critical first.

    Best-first search backward from the outputs, bounded by the arrival time of
    the current head gate, so complete paths surface in non-increasing length.
    Each gate is expanded at most ``visit_cap`` times, which keeps enumeration
    linear on reconvergent circuits while still touching every gate that has a
    path to an output. Past the cap a suffix is still finished along its most
    critical fanin when ``complete`` is set, so every gate lands on some returned
    path; with ``complete=False`` such suffixes are dropped instead. Ties are
    ordered by gate ids, then source.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    arrival = timing.arrival
    gates = netlist.gates
    heap: list = []
    for out in dict.fromkeys(netlist.outputs):
        if out in gates:
            heapq.heappush(heap, (-arrival[out], 1, (out,), ""))
    visits = dict.fromkeys(gates, 0)
    found: list[TimingPath] = []
    while heap:
        neg_bound, partial, suffix, source = heap[0]
        if len(found) >= k and -neg_bound < found[k - 1].length:
            break
        heapq.heappop(heap)
        if not partial:
            found.append(TimingPath(source, suffix))
            continue
        head = suffix[0]
        visits[head] += 1
        fanins = list(dict.fromkeys(gates[head].inputs))
        if visits[head] > visit_cap:
            if not complete:
                continue
            # over the cap: finish this suffix along its most critical fanin only
            fanins = [max(fanins, key=lambda n: (arrival.get(n, 0), n))]
        for net in fanins:
            if net in gates:
                heapq.heappush(heap, (-(arrival[net] + len(suffix)), 1, (net,) + suffix, ""))
            else:
                heapq.heappush(heap, (-len(suffix), 0, suffix, net))
    found.sort(key=lambda p: (-p.length, p.gates, p.source))
    return found[:k]
