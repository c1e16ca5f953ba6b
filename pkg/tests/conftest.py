"""Shared fixtures: small hand-built splits and cached protected benchmarks."""

from __future__ import annotations

from functools import lru_cache

import pytest

from split3d import corpus
from split3d.flow import ProtectConfig, protect
from split3d.layout import Outline, place_tier
from split3d.netlist import parse_bench
from split3d.partition import BOTTOM, TOP, Partition
from split3d.rdl import PlanOptions, build_plan, public_view


def split(netlist, top_gates, *, randomize=True, switchboxes=True, seed=0):
    """Plan an explicit two-tier split of ``netlist`` (``top_gates`` lifted)."""
    top = set(top_gates)
    assignment = {g: TOP if g in top else BOTTOM for g in netlist.gates}
    partition = Partition(assignment, "manual", len(top) / len(assignment), seed)
    outline = Outline.for_gates(len(netlist.gates))
    placements = {t: place_tier(netlist, partition.gates_in(t), outline, seed + i)
                  for i, t in enumerate((BOTTOM, TOP))}
    return build_plan(netlist, partition, placements, PlanOptions(randomize, switchboxes, seed))


def wires(n: int = 4) -> str:
    """``n`` independent input-to-output wires, each a bottom BUF feeding a top NOT."""
    lines = [f"INPUT(i{k})" for k in range(n)] + [f"OUTPUT(o{k})" for k in range(n)]
    for k in range(n):
        lines += [f"b{k} = BUF(i{k})", f"o{k} = NOT(b{k})"]
    return "\n".join(lines) + "\n"


@pytest.fixture
def wire_plan():
    netlist = parse_bench(wires(4), "wires")
    return netlist, split(netlist, [f"o{k}" for k in range(4)], seed=3)


@lru_cache(maxsize=None)
def protected(name: str, strategy: str = "timing", seed: int = 0, **options):
    return protect(corpus.load(name), ProtectConfig(strategy=strategy, seed=seed, **options))


@lru_cache(maxsize=None)
def view_of(name: str, strategy: str = "timing", seed: int = 0, mode: str = "conservative",
            **options):
    return public_view(protected(name, strategy, seed, **options).plan, mode)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
