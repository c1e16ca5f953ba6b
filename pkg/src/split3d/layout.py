"""Per-tier grid placement and on-track legalization.

Coordinates are abstract track units: a point is ``(row, track)`` on a grid
shared by both tiers. Nothing here knows about the other tier, so each tier's
placement depends only on its own gates, nets and seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

from .netlist import Netlist

Point = tuple[int, int]


class LegalizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Outline:
    rows: int
    tracks: int

    @property
    def diagonal(self) -> float:
        return math.hypot(self.rows - 1, self.tracks - 1)

    @property
    def size(self) -> int:
        return self.rows * self.tracks

    def __contains__(self, point: Point) -> bool:
        r, t = point
        return 0 <= r < self.rows and 0 <= t < self.tracks

    def points(self) -> list[Point]:
        return [(r, t) for r in range(self.rows) for t in range(self.tracks)]

    def clamp(self, row: float, track: float) -> Point:
        return (min(max(round(row), 0), self.rows - 1),
                min(max(round(track), 0), self.tracks - 1))

    @classmethod
    def for_gates(cls, count: int, utilization: float = 0.7) -> "Outline":
        side = max(2, math.ceil(math.sqrt(max(count, 1) / utilization)))
        return cls(side, side)


@dataclass
class Occupancy:
    outline: Outline
    taken: set[Point] = field(default_factory=set)

    def __contains__(self, point: Point) -> bool:
        return point in self.taken

    def free_points(self) -> list[Point]:
        return [p for p in self.outline.points() if p not in self.taken]


@lru_cache(maxsize=32)
def _ring_offsets(radius: float) -> tuple[tuple[int, int, int], ...]:
    reach = int(math.floor(radius))
    limit = radius * radius + 1e-9
    offsets = [(dr * dr + dt * dt, dr, dt)
               for dr in range(-reach, reach + 1)
               for dt in range(-reach, reach + 1)
               if dr * dr + dt * dt <= limit]
    offsets.sort()
    return tuple(offsets)


def legalize_on_track(target: Point, occupancy: Occupancy, radius_limit: float) -> Point:
    """Claim the nearest free track point within ``radius_limit`` of ``target``.

    Distance is Euclidean; equal distances resolve to the lexicographically
    smallest ``(row, track)``. The returned point is marked occupied.
    """
    if radius_limit < 0:
        raise ValueError("radius_limit must be non-negative")
    outline = occupancy.outline
    row, track = target
    for _, dr, dt in _ring_offsets(float(radius_limit)):
        point = (row + dr, track + dt)
        if point in outline and point not in occupancy.taken:
            occupancy.taken.add(point)
            return point
    raise LegalizationError(f"no free track point within radius {radius_limit} of {target}")


@dataclass(frozen=True)
class Placement:
    outline: Outline
    slots: dict[str, Point]

    def to_dict(self) -> dict:
        return {"outline": [self.outline.rows, self.outline.tracks],
                "slots": {g: list(p) for g, p in self.slots.items()}}


def tier_nets(netlist: Netlist, gates: Iterable[str]) -> list[list[str]]:
    """Nets restricted to the given gates: each is the driver plus same-tier readers."""
    members = set(gates)
    nets = []
    for net, sinks in netlist.fanout.items():
        pins = [net] if net in members else []
        pins += [s for s in sinks if s in members]
        if len(pins) > 1:
            nets.append(pins)
    return nets


def hpwl(slots: Mapping[str, Point], nets: Iterable[list[str]]) -> int:
    total = 0
    for pins in nets:
        rows = [slots[p][0] for p in pins]
        tracks = [slots[p][1] for p in pins]
        total += max(rows) - min(rows) + max(tracks) - min(tracks)
    return total


def place_tier(netlist: Netlist, gates: Iterable[str], outline: Outline, seed: int,
               iterations: int = 10) -> Placement:
    """Random initial placement refined by centroid passes.

    In every pass each gate is pulled toward the mean position of its connected
    same-tier gates and re-legalized; a move is kept only when it does not
    increase the half-perimeter wirelength of the gate's nets, so total HPWL is
    non-increasing across passes.
    """
    gates = list(gates)
    if len(gates) > outline.size:
        raise LegalizationError(f"{len(gates)} gates do not fit a {outline.rows}x{outline.tracks} grid")
    rng = random.Random(seed)
    points = outline.points()
    rng.shuffle(points)
    slots = dict(zip(gates, points))
    occupancy = Occupancy(outline, set(slots.values()))

    nets = tier_nets(netlist, gates)
    pin_nets: dict[str, list[list[str]]] = {g: [] for g in gates}
    for pins in nets:
        for p in pins:
            pin_nets[p].append(pins)
    neighbours = {g: sorted({p for pins in pin_nets[g] for p in pins} - {g}) for g in gates}
    radius = outline.diagonal + 1

    for _ in range(iterations):
        moved = 0
        for gate in gates:
            near = neighbours[gate]
            if not near:
                continue
            row = sum(slots[n][0] for n in near) / len(near)
            track = sum(slots[n][1] for n in near) / len(near)
            target = outline.clamp(row, track)
            current = slots[gate]
            if target == current:
                continue
            before = hpwl(slots, pin_nets[gate])
            occupancy.taken.discard(current)
            candidate = legalize_on_track(target, occupancy, radius)
            slots[gate] = candidate
            if candidate != current and hpwl(slots, pin_nets[gate]) <= before:
                moved += 1
                continue
            occupancy.taken.discard(candidate)
            occupancy.taken.add(current)
            slots[gate] = current
        if not moved:
            break
    return Placement(outline, slots)
