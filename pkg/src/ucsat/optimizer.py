"""Linear-search minimisation of the objective vector over a SAT backend.

Each satisfying assignment yields a schedule with objective ``omega``; the cut
``O < omega`` is then compiled into the same CNF and the backend is called
again. The last schedule found before UNSAT is optimal for the discretized
model.
"""

from __future__ import annotations

import enum
import logging
import os
import random
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .circuits import const_bitvec, decode as decode_bitvec, encode_cmp, value_of
from .cnf import Clause, write_dimacs
from .model import Schedule, evaluate_exact, validate_solution
from .reduction import EncodedProblem

logger = logging.getLogger(__name__)


class Status(str, enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    UNKNOWN = "UNKNOWN"


class ResultStatus(str, enum.Enum):
    PROVED_OPTIMAL = "ProvedOptimal"
    TIME_LIMIT = "TimeLimitBestKnown"
    INFEASIBLE = "Infeasible"


class BackendError(RuntimeError):
    pass


@dataclass
class SolveOutcome:
    status: Status
    model: list[int] | None = None
    stats: dict = field(default_factory=dict)
    wall_time: float = 0.0
    diagnostics: str = ""


class SatBackend:
    """Interface for SAT backends driven by :func:`solve_optimal`.

    Clauses are only ever added. ``solve`` with ``budget=None`` must be
    complete; with a budget it may return ``UNKNOWN``.
    """

    incremental = False

    def add_clauses(self, clauses: Sequence[Clause], num_vars: int) -> None:
        raise NotImplementedError

    def solve(self, budget: float | None = None) -> SolveOutcome:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class PysatBackend(SatBackend):
    """In-process incremental backend over a ``pysat`` solver.

    A ``seed`` randomizes the initial phases of all variables, which varies
    the search path between runs without affecting completeness.
    """

    incremental = True

    # CaDiCaL builds in pysat cannot be interrupted
    _NO_INTERRUPT = ("cadical",)

    def __init__(self, name: str = "glucose4", seed: int | None = None):
        from pysat.solvers import Solver

        self.name = name
        self.seed = seed
        self._solver = Solver(name=name)
        self._num_vars = 0
        self._phased = 0

    def add_clauses(self, clauses, num_vars):
        for c in clauses:
            self._solver.add_clause(c)
        self._num_vars = max(self._num_vars, num_vars)

    def _apply_phases(self):
        if self.seed is None or self._phased >= self._num_vars:
            return
        rng = random.Random(f"{self.seed}:{self._phased}")
        lits = [v if rng.random() < 0.5 else -v for v in range(self._phased + 1, self._num_vars + 1)]
        try:
            self._solver.set_phases(lits)
        except NotImplementedError:
            pass
        self._phased = self._num_vars

    def solve(self, budget=None):
        self._apply_phases()
        timer = None
        if budget is not None:
            if budget <= 0:
                return SolveOutcome(Status.UNKNOWN, diagnostics="budget exhausted")
            if self.name.startswith(self._NO_INTERRUPT):
                raise BackendError(f"solver {self.name} does not support time limits")
            timer = threading.Timer(budget, self._solver.interrupt)
            timer.start()
        start = time.perf_counter()
        try:
            if budget is None:
                res = self._solver.solve()
            else:
                res = self._solver.solve_limited(expect_interrupt=True)
        finally:
            if timer is not None:
                timer.cancel()
            if budget is not None:
                self._solver.clear_interrupt()
        wall = time.perf_counter() - start
        stats = dict(self._solver.accum_stats() or {})
        if res is None:
            return SolveOutcome(Status.UNKNOWN, stats=stats, wall_time=wall, diagnostics="interrupted")
        if res:
            model = self._solver.get_model()
            # solvers may omit trailing variables that occur in no clause
            if len(model) < self._num_vars:
                model = list(model) + [-v for v in range(len(model) + 1, self._num_vars + 1)]
            return SolveOutcome(Status.SAT, model, stats, wall)
        return SolveOutcome(Status.UNSAT, stats=stats, wall_time=wall)

    def close(self):
        if self._solver is not None:
            self._solver.delete()
            self._solver = None


class DimacsBackend(SatBackend):
    """Run an external solver executable on a DIMACS file for every call.

    The solver must print an ``s`` line and ``v`` lines on standard output and
    exit with 10 (SAT) or 20 (UNSAT).
    """

    incremental = False

    def __init__(self, command: str | Sequence[str]):
        self.command = [command] if isinstance(command, str) else list(command)
        self._clauses: list[Clause] = []
        self._num_vars = 0

    def add_clauses(self, clauses, num_vars):
        self._clauses.extend(tuple(c) for c in clauses)
        self._num_vars = max(self._num_vars, num_vars)

    def solve(self, budget=None):
        if budget is not None and budget <= 0:
            return SolveOutcome(Status.UNKNOWN, diagnostics="budget exhausted")
        fd, path = tempfile.mkstemp(suffix=".cnf")
        start = time.perf_counter()
        try:
            with os.fdopen(fd, "w") as fh:
                write_dimacs(fh, self._num_vars, self._clauses)
            try:
                proc = subprocess.run(self.command + [path], capture_output=True, text=True,
                                      timeout=budget)
            except subprocess.TimeoutExpired:
                return SolveOutcome(Status.UNKNOWN, wall_time=time.perf_counter() - start,
                                    diagnostics="external solver timed out")
        finally:
            os.unlink(path)
        wall = time.perf_counter() - start
        out = parse_solver_output(proc.stdout, proc.returncode, self._num_vars, wall, proc.stderr)
        if out.status is Status.SAT:
            true = set(out.model)
            if not all(any(l in true for l in c) for c in self._clauses):
                raise BackendError("external solver returned a model that violates the formula")
        return out


def parse_solver_output(stdout: str, returncode: int, num_vars: int, wall: float = 0.0,
                        stderr: str = "") -> SolveOutcome:
    status = None
    values: list[int] = []
    for line in stdout.splitlines():
        line = line.strip()
        if line.startswith("s "):
            word = line[2:].strip()
            if word == "SATISFIABLE":
                status = Status.SAT
            elif word == "UNSATISFIABLE":
                status = Status.UNSAT
            elif word == "UNKNOWN":
                status = Status.UNKNOWN
            else:
                raise BackendError(f"malformed status line {line!r}")
        elif line.startswith("v "):
            try:
                values.extend(int(tok) for tok in line[2:].split())
            except ValueError:
                raise BackendError(f"malformed value line {line!r}") from None
    expected = {Status.SAT: 10, Status.UNSAT: 20}
    if status is None:
        raise BackendError(f"solver printed no status line (exit {returncode}): {stderr.strip()[:200]}")
    if status in expected and returncode != expected[status]:
        raise BackendError(f"exit code {returncode} contradicts status {status.value}")
    if status is not Status.SAT:
        return SolveOutcome(status, wall_time=wall)
    # variables the solver leaves out occur in no clause it saw; any value will do
    assigned = {abs(v): v for v in values if v != 0}
    return SolveOutcome(Status.SAT, [assigned.get(v, -v) for v in range(1, num_vars + 1)], wall_time=wall)


def make_backend(spec: str = "internal", seed: int | None = None) -> SatBackend:
    """``internal``, ``pysat:<solver>`` or ``exec:<path>``."""
    if spec == "internal":
        return PysatBackend(seed=seed)
    if spec.startswith("pysat:"):
        return PysatBackend(spec.split(":", 1)[1], seed=seed)
    if spec.startswith("exec:"):
        return DimacsBackend(spec.split(":", 1)[1])
    raise ValueError(f"unknown backend {spec!r}")


# ---------------------------------------------------------------------------


@dataclass
class OptimizationResult:
    status: ResultStatus
    best: Schedule | None
    iterations: list[tuple[Fraction, float]] = field(default_factory=list)
    calls: int = 0
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)
    diagnostics: str = ""

    @property
    def omega(self) -> Fraction | None:
        return self.iterations[-1][0] if self.iterations else None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "best": None if self.best is None else self.best.to_dict(),
            "iterations": [{"omega": float(o), "time_s": round(t, 6)} for o, t in self.iterations],
            "calls": self.calls,
            "wall_time": round(self.wall_time, 6),
            "stats": self.stats,
            "diagnostics": self.diagnostics,
        }


def decode(ep: EncodedProblem, assignment) -> Schedule:
    """Read status, power and objective bits back into a :class:`Schedule`."""
    inst = ep.instance
    status = [[value_of(s, assignment) for s in row] for row in ep.status]
    power = [[decode_bitvec(p, assignment) for p in row] for row in ep.power]
    obj = decode_bitvec(ep.objective, assignment) if ep.objective is not None else None
    ev = evaluate_exact(inst, status, power)
    return Schedule(status, power, obj, ev.cost)


def discretized_cost(ep: EncodedProblem, sched: Schedule) -> Fraction | None:
    """Cost of ``sched`` priced with the rounded coefficients the CNF uses."""
    return evaluate_exact(ep.instance, sched.status, sched.power, costs=ep.rounded_units).cost


def solve_optimal(ep: EncodedProblem, backend: SatBackend | None = None, budget: float | None = None,
                  cut_cmp: str = "binary",
                  on_improve: Callable[[Schedule], None] | None = None) -> OptimizationResult:
    """Linear search on the objective: solve, tighten ``O < omega``, repeat until UNSAT.

    ``on_improve`` sees every improving schedule as it is found.
    """
    own = backend is None
    backend = backend or PysatBackend()
    b = ep.builder
    start = time.perf_counter()
    sent = 0
    best = None
    log: list[tuple[Fraction, float]] = []
    calls = 0
    stats: dict = {}
    try:
        while True:
            backend.add_clauses(b.clauses[sent:], b.num_vars)
            sent = len(b.clauses)
            remaining = None if budget is None else budget - (time.perf_counter() - start)
            outcome = backend.solve(remaining)
            calls += 1
            stats = outcome.stats or stats
            elapsed = time.perf_counter() - start
            if outcome.status is Status.SAT:
                sched = decode(ep, outcome.model)
                omega = sched.obj_discrete
                if not validate_solution(ep.instance, sched):
                    raise AssertionError(f"decoded schedule fails validation at omega={omega}")
                if log and not omega < log[-1][0]:
                    raise AssertionError(f"objective did not decrease: {omega} >= {log[-1][0]}")
                best = sched
                log.append((omega, elapsed))
                if on_improve is not None:
                    on_improve(sched)
                logger.info("%s: omega=%s exact=%s after %.3fs", ep.instance.name,
                            float(omega), float(sched.obj_exact), elapsed)
                with b.tagged("cut"):
                    bound = const_bitvec(b, omega, ep.objective.fmt)
                    encode_cmp(b, ep.objective, bound, "<", cut_cmp)
                continue
            if outcome.status is Status.UNSAT:
                status = ResultStatus.PROVED_OPTIMAL if best is not None else ResultStatus.INFEASIBLE
            else:
                status = ResultStatus.TIME_LIMIT
            return OptimizationResult(status, best, log, calls, elapsed, stats, outcome.diagnostics)
    finally:
        if own:
            backend.close()
