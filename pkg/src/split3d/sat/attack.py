"""Oracle-guided SAT attack on switchbox obfuscation.

Every box sink is modeled as a selector over its box's drivers, steered by
``ceil(log2 k)`` key bits. The attack is the usual distinguishing-input loop:
two keyed copies share the inputs and must disagree on some output; each
solution is a distinguishing input (DIP), the oracle answers it, and both key
copies are constrained to reproduce that answer. When no DIP is left any key
satisfying the recorded responses is functionally correct.

Selector keys can close combinational loops. Such keys are ruled out lazily:
whenever the solver proposes one, a clause forbidding that particular loop is
added and the call repeated.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Mapping, Sequence

from ..netlist import Netlist, simulate_words
from ..proximity import _Connectivity, find_cycle
from ..rdl import BOTTOM, TOP, PublicView
from .cnf import CnfFormula
from .solver import Solver

Value = "bool | int"  # constant or DIMACS literal

KEY_FOUND = "key_found"
TIMEOUT = "timeout"


@dataclass(frozen=True)
class KeyedCircuit:
    name: str
    core: Netlist                            # both tiers; sink stubs appear as free inputs
    boxes: tuple[tuple[str, tuple[str, ...], tuple[str, ...]], ...]  # (id, sinks, drivers)
    driver_net: dict[str, str]
    reach: dict[str, frozenset[str]]         # sink -> driver stubs fed through gates alone
    permutation: bool = True

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.core.inputs[: len(self.core.inputs) - len(self.sinks)]

    @property
    def outputs(self) -> tuple[str, ...]:
        return self.core.outputs

    @cached_property
    def sinks(self) -> tuple[str, ...]:
        return tuple(s for _, sinks, _ in self.boxes for s in sinks)

    def candidates(self, sink: str) -> tuple[str, ...]:
        return self._candidates[sink]

    @cached_property
    def _candidates(self) -> dict[str, tuple[str, ...]]:
        return {s: drivers for _, sinks, drivers in self.boxes for s in sinks}

    @cached_property
    def key_bits(self) -> dict[str, tuple[str, ...]]:
        """Key-bit names per sink, least significant first."""
        bits = {}
        for _, sinks, drivers in self.boxes:
            width = math.ceil(math.log2(len(drivers))) if len(drivers) > 1 else 0
            for s in sinks:
                bits[s] = tuple(f"{s}[{i}]" for i in range(width))
        return bits

    @property
    def key_width(self) -> int:
        return sum(len(b) for b in self.key_bits.values())

    def decode(self, bit_values: Mapping[str, bool]) -> dict[str, str]:
        """Sink -> driver stub for an assignment of all key bits."""
        key = {}
        cands = self._candidates
        for sink, names in self.key_bits.items():
            code = sum(1 << i for i, name in enumerate(names) if bit_values[name])
            if code >= len(cands[sink]):
                raise ValueError(f"invalid selector code {code} for {sink!r}")
            key[sink] = cands[sink][code]
        return key


def encode_keyed_circuit(view: PublicView, permutation: bool = True) -> KeyedCircuit:
    """Selector model of a conservative-mode view."""
    if view.mode != "conservative" or (view.boxes and not view.has_membership):
        raise ValueError("the SAT model needs a conservative-mode view with box membership")
    boxed = {s for b in view.boxes for s in b.sinks}
    if set(view.sinks) != boxed:
        raise ValueError("every sink stub must sit in a switchbox")
    gates = {g.id: g for tier in (BOTTOM, TOP) for g in view.tiers[tier]}
    sinks = [s for b in view.boxes for s in b.sinks]
    core = Netlist(gates, tuple(view.inputs) + tuple(sinks), tuple(view.outputs), (), view.name)
    conn = _Connectivity(view)
    reach = {s: frozenset(conn.downstream_drivers(s)) for s in sinks}
    boxes = tuple((b.id, tuple(b.sinks), tuple(b.drivers)) for b in view.boxes)
    return KeyedCircuit(view.name, core, boxes,
                        {d.id: d.net for d in view.drivers.values()}, reach, permutation)


class _Encoder:
    """Tseitin encoding with constant folding into any clause sink."""

    def __init__(self, sink):
        self.sink = sink

    def var(self) -> int:
        return self.sink.new_var()

    def clause(self, lits):
        self.sink.add_clause(lits)

    def conj(self, values) -> Value:
        lits = []
        for v in values:
            if v is False:
                return False
            if v is not True:
                lits.append(v)
        lits = list(dict.fromkeys(lits))
        if not lits:
            return True
        if len(lits) == 1:
            return lits[0]
        if any(-l in lits for l in lits):
            return False
        out = self.var()
        for l in lits:
            self.clause([-out, l])
        self.clause([out] + [-l for l in lits])
        return out

    def xor2(self, a: Value, b: Value) -> Value:
        if isinstance(a, bool):
            a, b = b, a
        if isinstance(b, bool):
            return neg(a) if b else a
        if a == b:
            return False
        if a == -b:
            return True
        out = self.var()
        self.clause([-out, a, b])
        self.clause([-out, -a, -b])
        self.clause([out, -a, b])
        self.clause([out, a, -b])
        return out

    def gate(self, function: str, ins: Sequence[Value]) -> Value:
        if function == "BUF":
            return ins[0]
        if function == "NOT":
            return neg(ins[0])
        if function in ("AND", "NAND"):
            out = self.conj(ins)
            return neg(out) if function == "NAND" else out
        if function in ("OR", "NOR"):
            out = neg(self.conj([neg(v) for v in ins]))
            return neg(out) if function == "NOR" else out
        if function in ("XOR", "XNOR"):
            out = ins[0]
            for v in ins[1:]:
                out = self.xor2(out, v)
            return neg(out) if function == "XNOR" else out
        raise ValueError(f"unsupported gate function {function!r}")

    def equal(self, value: Value, target: bool):
        if isinstance(value, bool):
            if value != target:
                self.clause([])
        else:
            self.clause([value if target else -value])

    def circuit(self, kc: KeyedCircuit, inputs: Mapping[str, Value],
                key: Mapping[str, int]) -> dict[str, Value]:
        """Encode one keyed copy; returns output net -> value."""
        values: dict[str, Value] = dict(inputs)
        for sink in kc.sinks:
            values[sink] = self.var()
        gates = kc.core.gates
        for gid in kc.core.order:
            gate = gates[gid]
            values[gid] = self.gate(gate.function, [values[n] for n in gate.inputs])
        bits = kc.key_bits
        for sink in kc.sinks:
            out = values[sink]
            for code, driver in enumerate(kc.candidates(sink)):
                miss = code_mismatch(bits[sink], code, key)
                dv = values[kc.driver_net[driver]]
                if dv is True:
                    self.clause(miss + [out])
                elif dv is False:
                    self.clause(miss + [-out])
                else:
                    self.clause(miss + [-dv, out])
                    self.clause(miss + [dv, -out])
        return {o: values[o] for o in kc.outputs}

    def key_constraints(self, kc: KeyedCircuit, key: Mapping[str, int]):
        bits = kc.key_bits
        for _, sinks, drivers in kc.boxes:
            k = len(drivers)
            for sink in sinks:
                for code in range(k, 1 << len(bits[sink])):
                    self.clause(code_mismatch(bits[sink], code, key))
            if kc.permutation:
                for i, a in enumerate(sinks):
                    for b in sinks[i + 1:]:
                        for code in range(k):
                            self.clause(code_mismatch(bits[a], code, key)
                                        + code_mismatch(bits[b], code, key))


def neg(value: Value) -> Value:
    return (not value) if isinstance(value, bool) else -value


def code_mismatch(names: Sequence[str], code: int, key: Mapping[str, int]) -> list[int]:
    """Literals of which at least one is true unless the bits spell ``code``."""
    return [-key[n] if code >> i & 1 else key[n] for i, n in enumerate(names)]


def keyed_formula(kc: KeyedCircuit) -> tuple[CnfFormula, dict[str, int]]:
    """Key constraints plus one symbolic copy of the keyed circuit, as plain CNF."""
    formula = CnfFormula()
    enc = _Encoder(formula)
    for net in kc.inputs:
        formula.new_var(net)
    key = {name: formula.new_var(name) for names in kc.key_bits.values() for name in names}
    enc.key_constraints(kc, key)
    outputs = enc.circuit(kc, {n: formula.var_map[n] for n in kc.inputs}, key)
    for net, value in outputs.items():
        if not isinstance(value, bool):
            formula.var_map.setdefault(net, abs(value))
    return formula, key


@dataclass
class SatAttackStats:
    dips: int = 0
    solver_calls: int = 0
    elapsed: float = 0.0
    outcome: str = TIMEOUT
    key_width: int = 0
    loops_blocked: int = 0
    conflicts: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def run_sat_attack(circuit: KeyedCircuit, oracle: Netlist, pattern_budget: int | None = None,
                   timeout: float | None = None) -> tuple[dict[str, str] | None, SatAttackStats]:
    """Recover a functionally correct key with the distinguishing-input loop.

    ``oracle`` plays the working chip and is only ever simulated. Exceeding
    ``timeout`` seconds or ``pattern_budget`` oracle queries ends the attack
    with outcome ``timeout`` and no key.
    """
    start = time.monotonic()
    deadline = None if timeout is None else start + timeout
    stats = SatAttackStats(key_width=circuit.key_width)
    if set(oracle.inputs) != set(circuit.inputs) or set(oracle.outputs) != set(circuit.outputs):
        raise ValueError("oracle interface does not match the keyed circuit")

    solver = Solver()
    enc = _Encoder(solver)
    names = [n for bits in circuit.key_bits.values() for n in bits]
    copies = [{n: solver.new_var() for n in names} for _ in range(2)]
    x = {net: solver.new_var() for net in circuit.inputs}
    bits = circuit.key_bits
    for key in copies:
        enc.key_constraints(circuit, key)
        for sink in circuit.sinks:  # a sink fed by its own fanout is a loop on its own
            for code, driver in enumerate(circuit.candidates(sink)):
                if driver in circuit.reach[sink]:
                    solver.add_clause(code_mismatch(bits[sink], code, key))
    out_a = enc.circuit(circuit, x, copies[0])
    out_b = enc.circuit(circuit, x, copies[1])
    diffs = [enc.xor2(out_a[o], out_b[o]) for o in circuit.outputs]
    act = solver.new_var()
    solver.add_clause([-act] + [d for d in diffs if d is not False and d is not True]
                      + ([act] if True in diffs else []))

    def finish(key, outcome):
        stats.outcome = outcome
        stats.solver_calls = solver.calls
        stats.conflicts = solver.conflicts
        stats.elapsed = time.monotonic() - start
        return key, stats

    def decoded(copy):
        return circuit.decode({n: solver.value(copy[n]) for n in names})

    def block_loops(keys) -> bool:
        blocked = False
        for key in keys:
            cycle = find_cycle(key, circuit.reach)
            if cycle is None:
                continue
            blocked = True
            stats.loops_blocked += 1
            codes = {s: circuit.candidates(s).index(key[s]) for s in cycle}
            for copy in copies:
                solver.add_clause([l for s in cycle for l in code_mismatch(bits[s], codes[s], copy)])
        return blocked

    ordered_inputs = list(circuit.inputs)
    while True:
        result = solver.solve([act], deadline)
        if result is None:
            return finish(None, TIMEOUT)
        if result is False:
            break
        if block_loops([decoded(copies[0]), decoded(copies[1])]):
            continue
        if pattern_budget is not None and stats.dips >= pattern_budget:
            return finish(None, TIMEOUT)
        pattern = {net: int(solver.value(x[net])) for net in ordered_inputs}
        response = simulate_words(oracle, pattern, 1)
        for copy in copies:
            outs = enc.circuit(circuit, {n: bool(v) for n, v in pattern.items()}, copy)
            for net, value in outs.items():
                enc.equal(value, bool(response[net]))
        stats.dips += 1

    while True:
        result = solver.solve([-act], deadline)
        if result is None:
            return finish(None, TIMEOUT)
        if result is False:
            raise RuntimeError("no key reproduces the oracle responses")
        key = decoded(copies[0])
        if not block_loops([key]):
            return finish(key, KEY_FOUND)
