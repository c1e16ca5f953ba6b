"""CNF container with DIMACS import/export.

Literals follow the DIMACS convention: variable ``v`` is the positive integer
``v``, its negation ``-v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, TextIO


class DimacsError(ValueError):
    pass


@dataclass
class CnfFormula:
    n_vars: int = 0
    clauses: list[tuple[int, ...]] = field(default_factory=list)
    var_map: dict[str, int] = field(default_factory=dict)

    def new_var(self, name: str | None = None) -> int:
        self.n_vars += 1
        if name is not None:
            self.var_map[name] = self.n_vars
        return self.n_vars

    def add_clause(self, lits: Iterable[int]) -> None:
        clause = tuple(lits)
        for lit in clause:
            if lit == 0 or abs(lit) > self.n_vars:
                raise ValueError(f"literal {lit} outside 1..{self.n_vars}")
        self.clauses.append(clause)

    def evaluate(self, assignment) -> bool:
        """Whether ``assignment`` (indexable by variable, truthy = true) satisfies every clause."""
        return all(any(bool(assignment[abs(l)]) == (l > 0) for l in c) for c in self.clauses)


def export_dimacs(formula: CnfFormula, sink: TextIO) -> None:
    sink.write(f"p cnf {formula.n_vars} {len(formula.clauses)}\n")
    for clause in formula.clauses:
        sink.write(" ".join(map(str, clause)) + " 0\n")


def to_dimacs(formula: CnfFormula) -> str:
    lines = [f"p cnf {formula.n_vars} {len(formula.clauses)}"]
    lines += [" ".join(map(str, c)) + " 0" for c in formula.clauses]
    return "\n".join(lines) + "\n"


def read_dimacs(text: str) -> CnfFormula:
    header = None
    tokens: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(("c", "%")):
            continue
        if line.startswith("p"):
            parts = line.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: bad header {line!r}")
            header = int(parts[2]), int(parts[3])
            continue
        if header is None:
            raise DimacsError(f"line {lineno}: clause before header")
        try:
            tokens += [int(t) for t in line.split()]
        except ValueError:
            raise DimacsError(f"line {lineno}: non-integer literal") from None
    if header is None:
        raise DimacsError("missing 'p cnf' header")
    n_vars, n_clauses = header
    formula = CnfFormula(n_vars)
    clause: list[int] = []
    for tok in tokens:
        if tok == 0:
            formula.add_clause(clause)
            clause = []
        else:
            clause.append(tok)
    if clause:
        raise DimacsError("last clause is not 0-terminated")
    if len(formula.clauses) != n_clauses:
        raise DimacsError(f"header announces {n_clauses} clauses, found {len(formula.clauses)}")
    return formula
