"""Bundled benchmark netlists and small generated fixtures."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..netlist import Netlist, parse_bench

ISCAS85 = ("c17", "c432", "c880", "c1355", "c3540")


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    suite: str
    gates: int
    inputs: int
    outputs: int
    depth: int
    source: str
    file: str

    @property
    def text(self) -> str:
        return (resources.files(__name__) / "data" / self.file).read_text()


@lru_cache(maxsize=None)
def manifest() -> dict[str, CorpusEntry]:
    raw = json.loads((resources.files(__name__) / "data" / "manifest.json").read_text())
    return {e["name"]: CorpusEntry(**e) for e in raw}


def names() -> list[str]:
    return list(manifest())


def bench_text(name: str) -> str:
    try:
        return manifest()[name].text
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; available: {', '.join(names())}") from None


@lru_cache(maxsize=None)
def load(name: str) -> Netlist:
    return parse_bench(bench_text(name), name)


def generate_chain(n: int, function: str = "NOT") -> str:
    """Linear chain of ``n`` single-input gates from input ``a`` to output ``y``."""
    if n < 1:
        raise ValueError("chain needs at least one gate")
    function = function.upper()
    if function not in ("NOT", "BUF"):
        raise ValueError(f"chain gates must be NOT or BUF, not {function}")
    lines = ["INPUT(a)", f"OUTPUT(g{n})"]
    prev = "a"
    for i in range(1, n + 1):
        lines.append(f"g{i} = {function}({prev})")
        prev = f"g{i}"
    return "\n".join(lines) + "\n"


def generate_crosscoupled_pair() -> str:
    """Two inverters driving each other.

    Not a valid combinational netlist on its own: levelization fails. Split
    across the two tiers it exercises loop exclusion in the proximity attack.
    """
    return "INPUT(a)\nOUTPUT(x)\nx = NOT(y)\ny = NOT(x)\n"


def generate_nand_xor() -> str:
    """The classic four-NAND XOR cell."""
    return (
        "INPUT(a)\nINPUT(b)\nOUTPUT(y)\n"
        "n1 = NAND(a, b)\nn2 = NAND(a, n1)\nn3 = NAND(b, n1)\ny = NAND(n2, n3)\n"
    )


__all__ = [
    "CorpusEntry", "ISCAS85", "bench_text", "generate_chain",
    "generate_crosscoupled_pair", "generate_nand_xor", "load", "manifest", "names",
]
