"""Clause database with fresh-variable allocation and DIMACS I/O.

Literals are DIMACS integers: ``v`` for a positive and ``-v`` for a negative
occurrence of variable ``v >= 1``.
"""

from __future__ import annotations

import io
from contextlib import contextmanager
from typing import IO, Iterable, Iterator, Sequence

Literal = int
Clause = tuple[Literal, ...]


class CnfError(ValueError):
    pass


class CnfBuilder:
    """Append-only CNF with an optional constant-true variable.

    ``guard`` literals pushed with :meth:`guarded` are appended to every clause
    added while the context is active, turning a sub-encoding ``F`` into
    ``g -> F`` for the conjunction ``g`` of the negated guard literals.
    """

    def __init__(self):
        self.num_vars = 0
        self.clauses: list[Clause] = []
        self.tags: list[tuple[str, int, int]] = []
        self._true: Literal | None = None
        self._guard: tuple[Literal, ...] = ()
        self._tag: str | None = None
        self._tag_start = (0, 0)

    def fresh_var(self) -> Literal:
        self.num_vars += 1
        return self.num_vars

    def fresh_vars(self, k: int) -> list[Literal]:
        return [self.fresh_var() for _ in range(k)]

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @property
    def true(self) -> Literal:
        if self._true is None:
            self._true = self.fresh_var()
            self.clauses.append((self._true,))
        return self._true

    @property
    def false(self) -> Literal:
        return -self.true

    def const(self, value: bool) -> Literal:
        return self.true if value else self.false

    def is_true(self, lit: Literal) -> bool:
        return self._true is not None and lit == self._true

    def is_false(self, lit: Literal) -> bool:
        return self._true is not None and lit == -self._true

    def is_const(self, lit: Literal) -> bool:
        return self._true is not None and abs(lit) == self._true

    def add_clause(self, lits: Iterable[Literal]) -> None:
        clause = tuple(lits) + self._guard
        if not clause:
            raise CnfError("empty clause; signal unsatisfiability explicitly")
        for lit in clause:
            if not isinstance(lit, int) or lit == 0 or abs(lit) > self.num_vars:
                raise CnfError(f"literal {lit!r} references an unallocated variable")
        self.clauses.append(clause)

    def add_clauses(self, clauses: Iterable[Iterable[Literal]]) -> None:
        for c in clauses:
            self.add_clause(c)

    def add_folded(self, lits: Iterable[Literal]) -> None:
        """Add a clause after resolving constant literals.

        A clause holding constant-true is dropped; constant-false literals are
        removed. A clause that folds to empty is recorded as the unit clause
        ``false`` (plus any active guard), which makes the CNF unsatisfiable.
        """
        out = []
        for lit in lits:
            if self.is_true(lit):
                return
            if self.is_false(lit):
                continue
            out.append(lit)
        if not out and not self._guard:
            out = [self.false]
        self.add_clause(out)

    @contextmanager
    def guarded(self, *lits: Literal) -> Iterator[None]:
        saved = self._guard
        self._guard = saved + tuple(lits)
        try:
            yield
        finally:
            self._guard = saved

    @contextmanager
    def tagged(self, tag: str) -> Iterator[None]:
        """Record the variable/clause ranges produced inside the block under ``tag``."""
        v0, c0 = self.num_vars, self.num_clauses
        try:
            yield
        finally:
            self.tags.append((tag, self.num_vars - v0, self.num_clauses - c0))

    def stats(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for tag, nv, nc in self.tags:
            entry = out.setdefault(tag, {"vars": 0, "clauses": 0})
            entry["vars"] += nv
            entry["clauses"] += nc
        return out

    def export_dimacs(self, sink: IO[str] | None = None) -> str | None:
        """Write ``p cnf`` header and clauses in insertion order.

        Returns the text when ``sink`` is omitted.
        """
        own = sink is None
        out = io.StringIO() if own else sink
        write_dimacs(out, self.num_vars, self.clauses)
        return out.getvalue() if own else None


def write_dimacs(out: IO[str], num_vars: int, clauses: Sequence[Sequence[Literal]]) -> None:
    out.write(f"p cnf {num_vars} {len(clauses)}\n")
    for clause in clauses:
        out.write(" ".join(map(str, clause)))
        out.write(" 0\n")


def parse_dimacs(text: str) -> tuple[int, list[Clause]]:
    num_vars = None
    declared = None
    clauses: list[Clause] = []
    current: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise CnfError(f"line {lineno}: bad problem line {line!r}")
            num_vars, declared = int(parts[2]), int(parts[3])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if current:
        clauses.append(tuple(current))
    if num_vars is None:
        raise CnfError("missing problem line")
    if declared != len(clauses):
        raise CnfError(f"header declares {declared} clauses, found {len(clauses)}")
    return num_vars, clauses


def unit_propagate(clauses: Sequence[Sequence[Literal]], assumptions: Iterable[Literal] = ()):
    """Unit propagation to fixpoint.

    Returns ``(assignment, conflict)`` where ``assignment`` maps variables to
    booleans and ``conflict`` is True when some clause became falsified.
    """
    value: dict[int, bool] = {}
    for lit in assumptions:
        v, b = abs(lit), lit > 0
        if value.get(v, b) != b:
            return value, True
        value[v] = b
    changed = True
    while changed:
        changed = False
        for clause in clauses:
            unassigned = None
            count = 0
            sat = False
            for lit in clause:
                b = value.get(abs(lit))
                if b is None:
                    count += 1
                    unassigned = lit
                elif b == (lit > 0):
                    sat = True
                    break
            if sat:
                continue
            if count == 0:
                return value, True
            if count == 1:
                value[abs(unassigned)] = unassigned > 0
                changed = True
    return value, False


def satisfied(clause: Sequence[Literal], value: dict[int, bool]) -> bool:
    return any(value.get(abs(lit)) == (lit > 0) for lit in clause)
