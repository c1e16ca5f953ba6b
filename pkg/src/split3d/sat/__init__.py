"""SAT modeling of switchbox obfuscation: CNF plumbing, an embedded solver, the attack loop."""

from .attack import (KEY_FOUND, TIMEOUT, KeyedCircuit, SatAttackStats, encode_keyed_circuit,
                     find_cycle, keyed_formula, run_sat_attack)
from .cnf import CnfFormula, DimacsError, export_dimacs, read_dimacs, to_dimacs
from .solver import Solver, solve_formula

__all__ = [
    "KEY_FOUND", "TIMEOUT", "KeyedCircuit", "SatAttackStats", "encode_keyed_circuit",
    "find_cycle", "keyed_formula", "run_sat_attack", "CnfFormula", "DimacsError",
    "export_dimacs", "read_dimacs", "to_dimacs", "Solver", "solve_formula",
]
