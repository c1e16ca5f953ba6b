"""Gate-level netlists: `.bench` parsing, levelization and bit-parallel simulation.

Sequential elements are cut at the register boundary: a ``q = DFF(d)`` statement
turns ``q`` into a pseudo primary input and ``d`` into a pseudo primary output, so
every netlist exposes a purely combinational core.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

FUNCTIONS = ("AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT", "BUF")
_ALIASES = {"BUFF": "BUF", "INV": "NOT"}
_SINGLE_INPUT = {"NOT", "BUF"}


class NetlistError(ValueError):
    """Base class for malformed-netlist errors."""


class ParseError(NetlistError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CycleError(NetlistError):
    def __init__(self, gate: str):
        self.gate = gate
        super().__init__(f"combinational cycle through gate {gate!r}")


@dataclass(frozen=True)
class Gate:
    id: str
    function: str
    inputs: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class Netlist:
    """Immutable combinational view of a gate-level design.

    Every gate drives exactly one net, named after the gate. ``inputs`` holds the
    primary inputs followed by DFF pseudo-inputs; ``outputs`` the primary
    outputs followed by DFF pseudo-outputs.
    """

    gates: Mapping[str, Gate]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    dffs: tuple[tuple[str, str], ...] = ()
    name: str = ""

    def __post_init__(self):
        seen = set(self.inputs)
        if len(seen) != len(self.inputs):
            raise NetlistError("duplicate primary input")
        for gid, gate in self.gates.items():
            if gid in seen:
                raise NetlistError(f"net {gid!r} has more than one driver")
            seen.add(gid)
        for gate in self.gates.values():
            for net in gate.inputs:
                if net not in seen:
                    raise NetlistError(f"gate {gate.id!r} reads undefined net {net!r}")
        for net in self.outputs:
            if net not in seen:
                raise NetlistError(f"output {net!r} is not driven")

    @property
    def nets(self) -> list[str]:
        return list(self.inputs) + list(self.gates)

    @cached_property
    def fanout(self) -> dict[str, tuple[str, ...]]:
        """Net id -> gate ids reading it (each reader listed once)."""
        out: dict[str, list[str]] = {net: [] for net in self.nets}
        for gate in self.gates.values():
            for net in dict.fromkeys(gate.inputs):
                out[net].append(gate.id)
        return {net: tuple(sinks) for net, sinks in out.items()}

    @cached_property
    def output_set(self) -> frozenset[str]:
        return frozenset(self.outputs)

    @cached_property
    def order(self) -> tuple[str, ...]:
        return tuple(levelize(self))

    @property
    def primary_inputs(self) -> tuple[str, ...]:
        pseudo = {q for q, _ in self.dffs}
        return tuple(n for n in self.inputs if n not in pseudo)

    @property
    def primary_outputs(self) -> tuple[str, ...]:
        return self.outputs[: len(self.outputs) - len(self.dffs)]

    def __repr__(self):
        return (f"Netlist({self.name!r}, gates={len(self.gates)}, "
                f"inputs={len(self.inputs)}, outputs={len(self.outputs)})")


_STATEMENT = re.compile(r"^([^\s=()]+)\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)$")
_PORT = re.compile(r"^(INPUT|OUTPUT)\s*\(\s*([^\s()]+)\s*\)$", re.IGNORECASE)


def parse_bench(text: str, name: str = "") -> Netlist:
    """Parse ISCAS-style ``.bench`` text.

    Raises :class:`ParseError` (with the offending line number) on syntax
    errors, unknown cell types, duplicate definitions and undefined signals.
    """
    inputs: list[str] = []
    outputs: list[tuple[str, int]] = []
    gates: dict[str, Gate] = {}
    dffs: list[tuple[str, str]] = []
    defined: dict[str, int] = {}
    uses: list[tuple[str, int]] = []

    def define(net: str, lineno: int):
        if net in defined:
            raise ParseError(f"duplicate definition of {net!r} "
                             f"(first defined on line {defined[net]})", lineno)
        defined[net] = lineno

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _PORT.match(line)
        if m:
            kind, net = m.group(1).upper(), m.group(2)
            if kind == "INPUT":
                define(net, lineno)
                inputs.append(net)
            else:
                outputs.append((net, lineno))
            continue
        m = _STATEMENT.match(line)
        if not m:
            raise ParseError(f"cannot parse {raw.strip()!r}", lineno)
        out, func, args = m.group(1), m.group(2).upper(), m.group(3)
        func = _ALIASES.get(func, func)
        operands = [a.strip() for a in args.split(",")] if args.strip() else []
        if not operands or any(not a for a in operands):
            raise ParseError(f"malformed operand list for {out!r}", lineno)
        define(out, lineno)
        uses.extend((a, lineno) for a in operands)
        if func == "DFF":
            if len(operands) != 1:
                raise ParseError("DFF takes exactly one input", lineno)
            dffs.append((out, operands[0]))
        elif func in FUNCTIONS:
            if func in _SINGLE_INPUT and len(operands) != 1:
                raise ParseError(f"{func} takes exactly one input", lineno)
            gates[out] = Gate(out, func, tuple(operands))
        else:
            raise ParseError(f"unknown cell type {m.group(2)!r}", lineno)

    if not inputs and not outputs:
        raise ParseError("no INPUT or OUTPUT declarations")
    for net, lineno in uses + outputs:
        if net not in defined:
            raise ParseError(f"undefined signal {net!r}", lineno)

    all_inputs = inputs + [q for q, _ in dffs]
    all_outputs = [net for net, _ in outputs] + [d for _, d in dffs]
    return Netlist(gates, tuple(all_inputs), tuple(all_outputs), tuple(dffs), name)


def to_bench(netlist: Netlist) -> str:
    """Serialize back to ``.bench``; ``parse_bench(to_bench(n))`` is isomorphic to ``n``."""
    lines = [f"# {netlist.name}"] if netlist.name else []
    lines += [f"INPUT({n})" for n in netlist.primary_inputs]
    lines += [f"OUTPUT({n})" for n in netlist.primary_outputs]
    lines += [f"{q} = DFF({d})" for q, d in netlist.dffs]
    for gate in netlist.gates.values():
        lines.append(f"{gate.id} = {gate.function}({', '.join(gate.inputs)})")
    return "\n".join(lines) + "\n"


_VERILOG_PRIMITIVES = {"and", "nand", "or", "nor", "xor", "xnor", "not", "buf"}


def parse_verilog(text: str, name: str = "") -> Netlist:
    """Read flat structural Verilog built from gate primitives only.

    Supports ``input``/``output``/``wire`` declarations, primitive instances
    with the output as first terminal, and ``assign a = b;`` buffers.
    """
    text = re.sub(r"//.*", "", text)
    text = re.sub(r"/\*.*?\*/", "", text, flags=re.S)
    inputs: list[str] = []
    outputs: list[str] = []
    gates: dict[str, Gate] = {}
    for stmt in text.split(";"):
        stmt = " ".join(stmt.split())
        if not stmt or stmt == "endmodule":
            continue
        if stmt.startswith("endmodule"):
            stmt = stmt[len("endmodule"):].strip()
            if not stmt:
                continue
        word = stmt.split(" ", 1)[0]
        if word == "module":
            name = name or stmt.split()[1].split("(")[0]
            continue
        if word in ("input", "output", "wire"):
            if "[" in stmt:
                raise ParseError("bus declarations are not supported")
            nets = [n.strip() for n in stmt[len(word):].split(",") if n.strip()]
            {"input": inputs, "output": outputs}.get(word, []).extend(nets)
            continue
        if word == "assign":
            m = re.match(r"assign (\S+) = (\S+)$", stmt)
            if not m:
                raise ParseError(f"unsupported assign {stmt!r}")
            gates[m.group(1)] = Gate(m.group(1), "BUF", (m.group(2),))
            continue
        if word in _VERILOG_PRIMITIVES:
            m = re.match(r"\w+\s*(?:[\w\\$\[\]]+\s*)?\((.*)\)$", stmt)
            if not m:
                raise ParseError(f"cannot parse instance {stmt!r}")
            terms = [t.strip() for t in m.group(1).split(",")]
            out, ins = terms[0], tuple(terms[1:])
            if out in gates:
                raise ParseError(f"net {out!r} driven twice")
            gates[out] = Gate(out, word.upper(), ins)
            continue
        raise ParseError(f"unsupported construct {word!r}")
    return Netlist(gates, tuple(inputs), tuple(outputs), (), name)


def levelize(netlist: Netlist) -> list[str]:
    """Topological gate order. Raises :class:`CycleError` naming a gate on a cycle."""
    pending = {}
    ready = []
    gate_inputs = {}
    for gid, gate in netlist.gates.items():
        fanin = {net for net in gate.inputs if net in netlist.gates}
        gate_inputs[gid] = fanin
        pending[gid] = len(fanin)
        if not fanin:
            ready.append(gid)
    order = []
    fanout = netlist.fanout
    while ready:
        gid = ready.pop()
        order.append(gid)
        for sink in fanout[gid]:
            pending[sink] -= 1
            if pending[sink] == 0:
                ready.append(sink)
    if len(order) != len(netlist.gates):
        # Walk fanins among unresolved gates until a gate repeats.
        stuck = sorted(g for g, c in pending.items() if c > 0)
        gid, seen = stuck[0], set()
        while gid not in seen:
            seen.add(gid)
            gid = min(n for n in gate_inputs[gid] if pending.get(n, 0) > 0)
        raise CycleError(gid)
    return order


def levels(netlist: Netlist) -> dict[str, int]:
    """Gate level: 1 + max level of its fanin (inputs sit at level 0)."""
    lvl = dict.fromkeys(netlist.inputs, 0)
    for gid in netlist.order:
        gate = netlist.gates[gid]
        lvl[gid] = 1 + max((lvl[n] for n in gate.inputs), default=0)
    return {g: lvl[g] for g in netlist.gates}


def _evaluate(function: str, values: Sequence[int], mask: int) -> int:
    if function == "BUF":
        return values[0]
    if function == "NOT":
        return values[0] ^ mask
    acc = values[0]
    if function in ("AND", "NAND"):
        for v in values[1:]:
            acc &= v
    elif function in ("OR", "NOR"):
        for v in values[1:]:
            acc |= v
    else:
        for v in values[1:]:
            acc ^= v
    if function in ("NAND", "NOR", "XNOR"):
        acc ^= mask
    return acc


def simulate_words(netlist: Netlist, words: Mapping[str, int], width: int) -> dict[str, int]:
    """Bit-parallel simulation: every input carries ``width`` patterns packed in an int.

    Returns output net -> packed response.
    """
    mask = (1 << width) - 1
    values = {net: words[net] & mask for net in netlist.inputs}
    gates = netlist.gates
    for gid in netlist.order:
        gate = gates[gid]
        values[gid] = _evaluate(gate.function, [values[n] for n in gate.inputs], mask)
    return {net: values[net] for net in netlist.outputs}


def simulate(netlist: Netlist, pattern: Sequence[int]) -> tuple[int, ...]:
    """Evaluate a single pattern given in ``netlist.inputs`` order."""
    if len(pattern) != len(netlist.inputs):
        raise ValueError(f"pattern width {len(pattern)} != {len(netlist.inputs)} inputs")
    words = {net: int(bool(bit)) for net, bit in zip(netlist.inputs, pattern)}
    out = simulate_words(netlist, words, 1)
    return tuple(out[net] for net in netlist.outputs)


def random_words(inputs: Iterable[str], width: int, seed) -> dict[str, int]:
    rng = random.Random(seed)
    return {net: rng.getrandbits(width) for net in inputs}
