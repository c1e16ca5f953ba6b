"""Defense-side pipeline: partition, place each tier independently, plan the RDL."""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass

from .layout import Outline, Placement, place_tier
from .netlist import Netlist
from .partition import BOTTOM, TOP, CutSet, Partition, cut_size, make_partition
from .rdl import PlanOptions, RdlPlan, build_plan


@dataclass(frozen=True)
class ProtectConfig:
    strategy: str = "timing"
    move_fraction: float = 0.5
    balance_eps: float = 0.05
    randomize: bool = True
    use_switchboxes: bool = True
    seed: int = 0
    placement_iterations: int = 10
    utilization: float = 0.7
    radius_limit: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Protected:
    config: ProtectConfig
    partition: Partition
    cuts: CutSet
    placements: dict[str, Placement]
    plan: RdlPlan


def tier_seed(seed: int, tier: str) -> int:
    """Independent per-tier placement seed; no tier's layout depends on the other's."""
    return zlib.crc32(f"{seed}/{tier}".encode())


def protect(netlist: Netlist, config: ProtectConfig = ProtectConfig()) -> Protected:
    partition = make_partition(netlist, config.strategy, move_fraction=config.move_fraction,
                               seed=config.seed, balance_eps=config.balance_eps)
    outline = Outline.for_gates(len(netlist.gates), config.utilization)
    placements = {
        tier: place_tier(netlist, partition.gates_in(tier), outline,
                         tier_seed(config.seed, tier), config.placement_iterations)
        for tier in (BOTTOM, TOP)
    }
    options = PlanOptions(config.randomize, config.use_switchboxes, config.seed,
                          config.radius_limit)
    plan = build_plan(netlist, partition, placements, options)
    return Protected(config, partition, cut_size(netlist, partition), placements, plan)
