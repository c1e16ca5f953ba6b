"""A small incremental CDCL solver.

Two watched literals, first-UIP learning with clause minimization, VSIDS
branching with phase saving, Luby restarts and LBD-based clause deletion.
Clauses may be added between calls and each call may carry assumptions, which
is what an iterative attack loop needs. Literals use the DIMACS convention.
"""

from __future__ import annotations

import heapq
import time
from typing import Iterable, Sequence

from .cnf import CnfFormula

_TRUE, _FALSE, _UNSET = 1, -1, 0


class _Clause:
    __slots__ = ("lits", "learnt", "lbd", "deleted")

    def __init__(self, lits: list[int], learnt: bool = False, lbd: int = 0):
        self.lits = lits
        self.learnt = learnt
        self.lbd = lbd
        self.deleted = False


def _luby(i: int) -> int:
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i %= size
    return 1 << seq


class Solver:
    """Incremental CDCL SAT solver.

    ``solve`` returns True (model available through :meth:`value` /
    :meth:`model`), False (unsatisfiable under the given assumptions) or None
    when the deadline passed first.
    """

    restart_base = 100

    def __init__(self, n_vars: int = 0):
        self.n_vars = 0
        self.ok = True
        self.watches: list[list[_Clause]] = [[], []]
        self.lit_value: list[int] = [_UNSET, _UNSET]
        self.level: list[int] = [0]
        self.reason: list[_Clause | None] = [None]
        self.activity: list[float] = [0.0]
        self.phase: list[bool] = [False]
        self.heap: list[tuple[float, int]] = []
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.learnts: list[_Clause] = []
        self.var_inc = 1.0
        self.max_learnts = 4000
        self.conflicts = 0
        self.decisions = 0
        self.calls = 0
        self._model: list[bool] = []
        for _ in range(n_vars):
            self.new_var()

    # -- literal helpers: internal index 2*v for v, 2*v+1 for -v
    @staticmethod
    def _ix(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    @staticmethod
    def _ext(ix: int) -> int:
        return -(ix >> 1) if ix & 1 else ix >> 1

    def new_var(self) -> int:
        self.n_vars += 1
        self.watches += [[], []]
        self.lit_value += [_UNSET, _UNSET]
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(False)
        heapq.heappush(self.heap, (0.0, self.n_vars))
        return self.n_vars

    def set_phase(self, lit: int, value: bool = True) -> None:
        """Preferred polarity of a variable when the solver branches on it."""
        self.phase[abs(lit)] = value if lit > 0 else not value

    def add_formula(self, formula: CnfFormula) -> bool:
        while self.n_vars < formula.n_vars:
            self.new_var()
        for clause in formula.clauses:
            self.add_clause(clause)
        return self.ok

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a clause at the root level; returns False once the formula is known unsatisfiable."""
        if not self.ok:
            return False
        self._cancel_until(0)
        clause: list[int] = []
        seen = set()
        for lit in lits:
            if lit == 0 or abs(lit) > self.n_vars:
                raise ValueError(f"literal {lit} outside 1..{self.n_vars}")
            ix = self._ix(lit)
            value = self.lit_value[ix]
            if value == _TRUE or ix ^ 1 in seen:
                return True
            if value == _FALSE or ix in seen:
                continue
            seen.add(ix)
            clause.append(ix)
        if not clause:
            self.ok = False
        elif len(clause) == 1:
            self._enqueue(clause[0], None)
            self.ok = self._propagate() is None
        else:
            self._attach(_Clause(clause))
        return self.ok

    def _attach(self, c: _Clause):
        self.watches[c.lits[0]].append(c)
        self.watches[c.lits[1]].append(c)

    def _enqueue(self, ix: int, reason: _Clause | None):
        self.lit_value[ix] = _TRUE
        self.lit_value[ix ^ 1] = _FALSE
        v = ix >> 1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(ix)

    def _propagate(self) -> _Clause | None:
        lit_value = self.lit_value
        watches = self.watches
        trail = self.trail
        while self.qhead < len(trail):
            false_ix = trail[self.qhead] ^ 1
            self.qhead += 1
            ws = watches[false_ix]
            keep: list[_Clause] = []
            watches[false_ix] = keep
            n = len(ws)
            k = 0
            while k < n:
                c = ws[k]
                k += 1
                if c.deleted:
                    continue
                lits = c.lits
                if lits[0] == false_ix:
                    lits[0], lits[1] = lits[1], false_ix
                first = lits[0]
                if lit_value[first] == _TRUE:
                    keep.append(c)
                    continue
                for i in range(2, len(lits)):
                    other = lits[i]
                    if lit_value[other] != _FALSE:
                        lits[1], lits[i] = other, false_ix
                        watches[other].append(c)
                        break
                else:
                    keep.append(c)
                    if lit_value[first] == _FALSE:
                        keep.extend(ws[k:])
                        self.qhead = len(trail)
                        return c
                    self._enqueue(first, c)
        return None

    def _cancel_until(self, level: int):
        if len(self.trail_lim) <= level:
            return
        start = self.trail_lim[level]
        for ix in reversed(self.trail[start:]):
            v = ix >> 1
            self.lit_value[ix] = _UNSET
            self.lit_value[ix ^ 1] = _UNSET
            self.reason[v] = None
            self.phase[v] = not (ix & 1)
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[start:]
        del self.trail_lim[level:]
        self.qhead = len(self.trail)

    def _bump(self, v: int):
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            self.activity = [a * 1e-100 for a in self.activity]
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.n_vars + 1)
                         if self.lit_value[2 * u] == _UNSET]
            heapq.heapify(self.heap)
        elif self.lit_value[2 * v] == _UNSET:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def _analyze(self, conflict: _Clause) -> tuple[list[int], int]:
        seen = set()
        learnt = [0]
        counter = 0
        current = len(self.trail_lim)
        idx = len(self.trail) - 1
        clause = conflict
        p = None
        while True:
            lits = clause.lits if p is None else clause.lits[1:]
            for q in lits:
                v = q >> 1
                if v not in seen and self.level[v] > 0:
                    seen.add(v)
                    self._bump(v)
                    if self.level[v] == current:
                        counter += 1
                    else:
                        learnt.append(q)
            while (self.trail[idx] >> 1) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            clause = self.reason[p >> 1]
        learnt[0] = p ^ 1
        self.var_inc *= 1.05

        # drop literals implied by the rest of the clause
        in_clause = {q >> 1 for q in learnt}
        minimized = [learnt[0]]
        for q in learnt[1:]:
            r = self.reason[q >> 1]
            if r is None or any((x >> 1) not in in_clause and self.level[x >> 1] > 0
                                for x in r.lits[1:]):
                minimized.append(q)
        learnt = minimized

        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda i: self.level[learnt[i] >> 1])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[learnt[1] >> 1]

    def _reduce_db(self):
        locked = {id(self.reason[c.lits[0] >> 1]) for c in self.learnts}
        candidates = sorted((c for c in self.learnts if c.lbd > 2 and id(c) not in locked),
                            key=lambda c: -c.lbd)
        for c in candidates[: len(candidates) // 2]:
            c.deleted = True
        self.learnts = [c for c in self.learnts if not c.deleted]
        self.max_learnts = int(self.max_learnts * 1.1)

    def _pick(self) -> int | None:
        heap = self.heap
        while heap:
            neg_act, v = heapq.heappop(heap)
            if self.lit_value[2 * v] == _UNSET and -neg_act == self.activity[v]:
                return v
        for v in range(1, self.n_vars + 1):  # stale heap entries only
            if self.lit_value[2 * v] == _UNSET:
                return v
        return None

    def solve(self, assumptions: Sequence[int] = (), deadline: float | None = None) -> bool | None:
        """Search for a model; ``deadline`` is a :func:`time.monotonic` timestamp."""
        self.calls += 1
        if not self.ok:
            return False
        self._cancel_until(0)
        if self._propagate() is not None:
            self.ok = False
            return False
        assume = [self._ix(a) for a in assumptions]
        restarts = 0
        budget = self.restart_base * _luby(restarts)
        since_restart = 0
        while True:
            conflict = self._propagate()
            if conflict is not None:
                self.conflicts += 1
                since_restart += 1
                if not self.trail_lim:
                    self.ok = False
                    return False
                learnt, back = self._analyze(conflict)
                self._cancel_until(back)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    lbd = len({self.level[q >> 1] for q in learnt})
                    c = _Clause(learnt, True, lbd)
                    self._attach(c)
                    self.learnts.append(c)
                    self._enqueue(learnt[0], c)
                if deadline is not None and self.conflicts % 64 == 0 and time.monotonic() > deadline:
                    self._cancel_until(0)
                    return None
                continue
            if since_restart >= budget:
                restarts += 1
                budget = self.restart_base * _luby(restarts)
                since_restart = 0
                self._cancel_until(0)
                continue
            if len(self.learnts) - len(self.trail) > self.max_learnts:
                self._reduce_db()
            decision = None
            while len(self.trail_lim) < len(assume):
                a = assume[len(self.trail_lim)]
                if self.lit_value[a] == _TRUE:
                    self.trail_lim.append(len(self.trail))
                elif self.lit_value[a] == _FALSE:
                    self._cancel_until(0)
                    return False
                else:
                    decision = a
                    break
            if decision is None:
                v = self._pick()
                if v is None:
                    self._model = [False] + [self.lit_value[2 * u] == _TRUE
                                             for u in range(1, self.n_vars + 1)]
                    self._cancel_until(0)
                    return True
                decision = 2 * v if self.phase[v] else 2 * v + 1
                self.decisions += 1
                if deadline is not None and self.decisions % 256 == 0 and time.monotonic() > deadline:
                    self._cancel_until(0)
                    return None
            self.trail_lim.append(len(self.trail))
            self._enqueue(decision, None)

    def value(self, lit: int) -> bool:
        """Truth value of ``lit`` in the last model."""
        return self._model[lit] if lit > 0 else not self._model[-lit]

    def model(self) -> list[bool]:
        """Last model indexed by variable (index 0 unused)."""
        return list(self._model)


def solve_formula(formula: CnfFormula, assumptions: Sequence[int] = (),
                  timeout: float | None = None) -> tuple[bool | None, list[bool]]:
    solver = Solver()
    solver.add_formula(formula)
    deadline = None if timeout is None else time.monotonic() + timeout
    result = solver.solve(assumptions, deadline)
    return result, solver.model() if result else []
