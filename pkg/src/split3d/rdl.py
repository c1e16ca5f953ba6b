"""Obfuscated RDL planning: F2F ports, switchboxes and the secret connection key.

A crossing net owns one F2F via, i.e. one *driver stub* in the driver's tier
and one *sink stub* in the other tier. Stub ids are drawn from independent
shuffles so the names carry no pairing information. The secret key maps every
sink stub to its driver stub; switchboxes group same-direction crossings in
fours and hide the in-box permutation.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import jsonschema

from .layout import (LegalizationError, Occupancy, Outline, Placement, Point,
                     legalize_on_track)
from .netlist import CycleError, Gate, Netlist, levelize
from .partition import BOTTOM, DOWN, TOP, UP, CutSet, Partition, cut_size

BOX_SIZE = 4
MODES = ("conservative", "full")
VIEW_FORMAT = "split3d.public-view/1"


class PlanError(RuntimeError):
    pass


class InvalidKeyError(ValueError):
    pass


@dataclass(frozen=True)
class PlanOptions:
    randomize: bool = True
    use_switchboxes: bool = True
    seed: int = 0
    radius_limit: float | None = None


@dataclass(frozen=True)
class F2FPort:
    net: str
    direction: str
    bottom: Point
    top: Point
    displacement: float
    driver_stub: str
    sink_stub: str

    @property
    def driver_point(self) -> Point:
        return self.bottom if self.direction == UP else self.top

    @property
    def sink_point(self) -> Point:
        return self.top if self.direction == UP else self.bottom


@dataclass(frozen=True)
class SwitchBox:
    """``sinks[j]`` is wired to ``drivers[perm[j]]``."""

    id: str
    direction: str
    drivers: tuple[str, ...]
    sinks: tuple[str, ...]
    perm: tuple[int, ...]
    location: Point

    @property
    def size(self) -> int:
        return len(self.drivers)


@dataclass(frozen=True)
class RdlPlan:
    netlist: Netlist
    partition: Partition
    outline: Outline
    ports: tuple[F2FPort, ...]
    boxes: tuple[SwitchBox, ...]
    options: PlanOptions

    @property
    def key(self) -> dict[str, str]:
        return {p.sink_stub: p.driver_stub for p in self.ports}

    def to_dict(self) -> dict:
        """Private serialization, including the key."""
        return {
            "format": "split3d.rdl-plan/1",
            "benchmark": self.netlist.name,
            "options": vars(self.options).copy(),
            "outline": [self.outline.rows, self.outline.tracks],
            "ports": [
                {"net": p.net, "direction": p.direction, "bottom": list(p.bottom),
                 "top": list(p.top), "displacement": p.displacement,
                 "driver_stub": p.driver_stub, "sink_stub": p.sink_stub}
                for p in self.ports
            ],
            "switchboxes": [
                {"id": b.id, "direction": b.direction, "drivers": list(b.drivers),
                 "sinks": list(b.sinks), "perm": list(b.perm), "location": list(b.location)}
                for b in self.boxes
            ],
            "key": self.key,
        }


def _centroid(points: list[Point]) -> tuple[float, float]:
    return (sum(p[0] for p in points) / len(points), sum(p[1] for p in points) / len(points))


def build_plan(netlist: Netlist, partition: Partition, placements: Mapping[str, Placement],
               options: PlanOptions = PlanOptions()) -> RdlPlan:
    """Plan one F2F via per crossing net and group them into switchboxes.

    Bottom-side ports sit at the legalized centroid of all instances on the net.
    Top-side ports are either aligned with them or, when randomizing, drawn
    uniformly from the free track points of the whole outline.
    """
    outline = placements[BOTTOM].outline
    if placements[TOP].outline != outline:
        raise PlanError("tiers must share one outline")
    rng = random.Random(options.seed)
    cuts: CutSet = cut_size(netlist, partition)
    radius = options.radius_limit
    if radius is None:
        # a quarter of the diagonal, but never too small for a corner quarter-disc to hold every port
        radius = max(outline.diagonal / 4, 2 * math.sqrt(len(cuts) / math.pi) + 1)
    slots = {**placements[BOTTOM].slots, **placements[TOP].slots}

    driver_ids = _stub_ids("d", len(cuts), rng)
    sink_ids = _stub_ids("s", len(cuts), rng)
    bottom_layer = Occupancy(outline)
    top_layer = Occupancy(outline)
    free_top = outline.points()
    ports = []
    for i, crossing in enumerate(cuts):
        pins = [slots[crossing.net]] + [slots[s] for s in netlist.fanout[crossing.net]]
        target = outline.clamp(*_centroid(pins))
        try:
            bottom = legalize_on_track(target, bottom_layer, radius)
        except LegalizationError as exc:
            raise PlanError(f"cannot place F2F port of net {crossing.net!r}: {exc}") from exc
        if options.randomize:
            j = rng.randrange(len(free_top))
            top = free_top[j]
            free_top[j] = free_top[-1]
            free_top.pop()
        else:
            top = bottom
        top_layer.taken.add(top)
        displacement = math.dist(bottom, top) / outline.diagonal if outline.diagonal else 0.0
        ports.append(F2FPort(crossing.net, crossing.direction, bottom, top,
                             min(displacement, 1.0), driver_ids[i], sink_ids[i]))

    boxes = []
    if options.use_switchboxes:
        box_layer = Occupancy(outline)
        for direction in (UP, DOWN):
            group = [p for p in ports if p.direction == direction]
            rng.shuffle(group)
            for start in range(0, len(group), BOX_SIZE):
                chunk = group[start:start + BOX_SIZE]
                k = len(chunk)
                perm = tuple(rng.sample(range(k), k))
                target = outline.clamp(*_centroid([p.bottom for p in chunk]))
                location = legalize_on_track(target, box_layer, outline.diagonal + 1)
                boxes.append(SwitchBox(
                    f"{direction}-{start // BOX_SIZE:04d}", direction,
                    tuple(p.driver_stub for p in chunk),
                    tuple(chunk[perm[j]].sink_stub for j in range(k)),
                    perm, location))
    return RdlPlan(netlist, partition, outline, tuple(ports), tuple(boxes), options)


def _stub_ids(prefix: str, count: int, rng: random.Random) -> list[str]:
    ids = [f"{prefix}{i:05d}" for i in range(count)]
    rng.shuffle(ids)
    return ids


def distance_histogram(plan: RdlPlan) -> list[float]:
    """Normalized driver-to-sink via distance, one value per crossing net."""
    return [p.displacement for p in plan.ports]


# --------------------------------------------------------------------------- public view

@dataclass(frozen=True)
class Stub:
    id: str
    tier: str
    direction: str
    point: Point
    net: str | None = None  # driving net, driver stubs only


@dataclass(frozen=True)
class BoxView:
    id: str
    direction: str
    location: Point
    drivers: tuple[str, ...] | None = None
    sinks: tuple[str, ...] | None = None


@dataclass(frozen=True)
class PublicView:
    """What the untrusted foundry sees: both tiers, dangling stubs, no RDL key."""

    mode: str
    name: str
    outline: Outline
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    tiers: dict[str, tuple[Gate, ...]]
    drivers: dict[str, Stub]
    sinks: dict[str, Stub]
    boxes: tuple[BoxView, ...] = ()
    membership: dict[str, str] = field(default_factory=dict)  # stub id -> box id

    @property
    def has_membership(self) -> bool:
        return bool(self.boxes) and self.boxes[0].drivers is not None

    def box_of(self, stub: str) -> BoxView | None:
        box_id = self.membership.get(stub)
        return self._boxes_by_id.get(box_id) if box_id else None

    @cached_property
    def _boxes_by_id(self) -> dict[str, BoxView]:
        return {b.id: b for b in self.boxes}

    def to_dict(self) -> dict:
        boxes = []
        for b in self.boxes:
            entry = {"id": b.id, "direction": b.direction, "location": list(b.location)}
            if b.drivers is not None:
                entry["drivers"] = list(b.drivers)
                entry["sinks"] = list(b.sinks)
            boxes.append(entry)
        return {
            "format": VIEW_FORMAT,
            "mode": self.mode,
            "name": self.name,
            "outline": [self.outline.rows, self.outline.tracks],
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "tiers": {t: [[g.id, g.function, list(g.inputs)] for g in gates]
                      for t, gates in self.tiers.items()},
            "driver_stubs": [
                {"id": s.id, "tier": s.tier, "direction": s.direction,
                 "point": list(s.point), "net": s.net}
                for s in self.drivers.values()
            ],
            "sink_stubs": [
                {"id": s.id, "tier": s.tier, "direction": s.direction, "point": list(s.point)}
                for s in self.sinks.values()
            ],
            "switchboxes": boxes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PublicView":
        validate_view(data)
        boxes = tuple(
            BoxView(b["id"], b["direction"], tuple(b["location"]),
                    tuple(b["drivers"]) if "drivers" in b else None,
                    tuple(b["sinks"]) if "sinks" in b else None)
            for b in data["switchboxes"]
        )
        return cls(
            data["mode"], data["name"], Outline(*data["outline"]),
            tuple(data["inputs"]), tuple(data["outputs"]),
            {t: tuple(Gate(i, f, tuple(ins)) for i, f, ins in gates)
             for t, gates in data["tiers"].items()},
            {s["id"]: Stub(s["id"], s["tier"], s["direction"], tuple(s["point"]), s["net"])
             for s in data["driver_stubs"]},
            {s["id"]: Stub(s["id"], s["tier"], s["direction"], tuple(s["point"]))
             for s in data["sink_stubs"]},
            boxes, _membership(boxes),
        )


def _membership(boxes) -> dict[str, str]:
    out = {}
    for b in boxes:
        for stub in (b.drivers or ()) + (b.sinks or ()):
            out[stub] = b.id
    return out


_POINT = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}
_DIRECTION = {"enum": [UP, DOWN]}
_TIER = {"enum": [BOTTOM, TOP]}
_NAMES = {"type": "array", "items": {"type": "string"}}

PUBLIC_VIEW_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["format", "mode", "name", "outline", "inputs", "outputs", "tiers",
                 "driver_stubs", "sink_stubs", "switchboxes"],
    "properties": {
        "format": {"const": VIEW_FORMAT},
        "mode": {"enum": list(MODES)},
        "name": {"type": "string"},
        "outline": _POINT,
        "inputs": _NAMES,
        "outputs": _NAMES,
        "tiers": {
            "type": "object",
            "additionalProperties": False,
            "required": [BOTTOM, TOP],
            "properties": {t: {"type": "array", "items": {
                "type": "array", "minItems": 3, "maxItems": 3,
                "prefixItems": [{"type": "string"}, {"type": "string"}, _NAMES]}}
                for t in (BOTTOM, TOP)},
        },
        "driver_stubs": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["id", "tier", "direction", "point", "net"],
            "properties": {"id": {"type": "string"}, "tier": _TIER, "direction": _DIRECTION,
                           "point": _POINT, "net": {"type": "string"}},
        }},
        "sink_stubs": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["id", "tier", "direction", "point"],
            "properties": {"id": {"type": "string"}, "tier": _TIER, "direction": _DIRECTION,
                           "point": _POINT},
        }},
        "switchboxes": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["id", "direction", "location"],
            "properties": {"id": {"type": "string"}, "direction": _DIRECTION,
                           "location": _POINT, "drivers": _NAMES, "sinks": _NAMES},
        }},
    },
}


def validate_view(data: dict) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``data`` is a key-free public view."""
    jsonschema.validate(data, PUBLIC_VIEW_SCHEMA)


def public_view(plan: RdlPlan, mode: str = "conservative") -> PublicView:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    netlist, tiers = plan.netlist, plan.partition.assignment
    by_net = {p.net: p for p in plan.ports}
    gates: dict[str, list[Gate]] = {BOTTOM: [], TOP: []}
    for gid, gate in netlist.gates.items():
        tier = tiers[gid]
        inputs = tuple(
            by_net[n].sink_stub if n in netlist.gates and tiers[n] != tier else n
            for n in gate.inputs
        )
        gates[tier].append(Gate(gid, gate.function, inputs))

    drivers = {}
    sinks = {}
    for p in sorted(plan.ports, key=lambda p: p.driver_stub):
        tier = BOTTOM if p.direction == UP else TOP
        drivers[p.driver_stub] = Stub(p.driver_stub, tier, p.direction, p.driver_point, p.net)
    for p in sorted(plan.ports, key=lambda p: p.sink_stub):
        tier = TOP if p.direction == UP else BOTTOM
        sinks[p.sink_stub] = Stub(p.sink_stub, tier, p.direction, p.sink_point)

    boxes = tuple(
        BoxView(b.id, b.direction, b.location,
                tuple(sorted(b.drivers)) if mode == "conservative" else None,
                tuple(sorted(b.sinks)) if mode == "conservative" else None)
        for b in plan.boxes
    )
    return PublicView(mode, netlist.name, plan.outline, netlist.inputs, netlist.outputs,
                      {t: tuple(g) for t, g in gates.items()}, drivers, sinks, boxes,
                      _membership(boxes))


def check_key(view: PublicView, key: Mapping[str, str]) -> None:
    if set(key) != set(view.sinks):
        missing = sorted(set(view.sinks) - set(key))[:3]
        extra = sorted(set(key) - set(view.sinks))[:3]
        raise InvalidKeyError(f"key must cover every sink stub (missing {missing}, unknown {extra})")
    used = {}
    for sink, driver in key.items():
        if driver not in view.drivers:
            raise InvalidKeyError(f"unknown driver stub {driver!r}")
        if view.drivers[driver].direction != view.sinks[sink].direction:
            raise InvalidKeyError(f"{sink!r} and {driver!r} cross in opposite directions")
        if driver in used:
            raise InvalidKeyError(f"driver {driver!r} feeds both {used[driver]!r} and {sink!r}")
        used[driver] = sink
        if view.membership and view.membership.get(sink) != view.membership.get(driver):
            raise InvalidKeyError(f"{sink!r} and {driver!r} sit in different switchboxes")


def apply_key(view: PublicView, key: Mapping[str, str], name: str | None = None) -> Netlist:
    """Reconnect every sink stub to its keyed driver and merge both tiers.

    Raises :class:`InvalidKeyError` for malformed or non-bijective keys and for
    keys that close a combinational loop.
    """
    check_key(view, key)
    resolve = {sink: view.drivers[driver].net for sink, driver in key.items()}
    gates = {}
    for tier in (BOTTOM, TOP):
        for gate in view.tiers[tier]:
            gates[gate.id] = Gate(gate.id, gate.function,
                                  tuple(resolve.get(n, n) for n in gate.inputs))
    merged = Netlist(gates, view.inputs, view.outputs, (), name or view.name)
    try:
        levelize(merged)
    except CycleError as exc:
        raise InvalidKeyError(f"key closes a combinational loop through {exc.gate!r}") from exc
    return merged
