"""Compile a :class:`~ucsat.model.UcInstance` into CNF plus an objective bit-vector.

Duration counters are never encoded. Minimum up/down times and the cold-start
indicator are expressed as windows over the status literals, which are pure
clauses and give the same feasible set and the same hot/cold classification.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import IO

from .circuits import (
    BitVec,
    FixedPointFormat,
    GridError,
    bool_bitvec,
    const_bitvec,
    encode_add,
    encode_cmp,
    encode_eq,
    encode_mul,
    encode_square,
    encode_sum,
    frac_bits_needed,
    fresh_bitvec,
    round_to_grid,
    to_raw,
)
from .cnf import CnfBuilder, Literal
from .model import UcInstance, UnitParams

logger = logging.getLogger(__name__)

CAPACITY_MODES = ("specialized", "generic")
CMP_MODES = ("binary", "tseitin")
MAX_AUTO_FRAC_BITS = 16


@dataclass(frozen=True)
class ReduceOptions:
    capacity: str = "specialized"
    cmp: str = "binary"
    frac_bits: int | None = None
    cost_frac_bits: int = 7

    def __post_init__(self):
        if self.capacity not in CAPACITY_MODES:
            raise ValueError(f"capacity must be one of {CAPACITY_MODES}")
        if self.cmp not in CMP_MODES:
            raise ValueError(f"cmp must be one of {CMP_MODES}")
        if self.frac_bits is not None and self.frac_bits < 0:
            raise ValueError("frac_bits must be non-negative")
        if self.cost_frac_bits < 0:
            raise ValueError("cost_frac_bits must be non-negative")


@dataclass
class EncodedProblem:
    instance: UcInstance
    options: ReduceOptions
    builder: CnfBuilder
    power_format: FixedPointFormat
    status: list[list[Literal]]
    startup: list[list[Literal]]
    shutdown: list[list[Literal]]
    cold: list[list[Literal]]
    power: list[list[BitVec]]
    objective: BitVec | None = None
    rounded_units: tuple[UnitParams, ...] = ()
    rounding_report: list[tuple[int, str, Fraction, Fraction]] = field(default_factory=list)

    @property
    def objective_format(self) -> FixedPointFormat:
        return self.objective.fmt

    @property
    def frac_bits(self) -> int:
        return self.power_format.m

    def stats(self) -> dict:
        return {
            "vars": self.builder.num_vars,
            "clauses": self.builder.num_clauses,
            "by_tag": self.builder.stats(),
        }

    def cmp(self, x: BitVec, y: BitVec, op: str) -> None:
        encode_cmp(self.builder, x, y, op, self.options.cmp)

    def write_map(self, out: IO[str]) -> None:
        """Sidecar listing the literal behind every named quantity (1-based unit/period/bit)."""
        N, T = self.instance.n_units, self.instance.horizon
        for i in range(N):
            for t in range(T):
                out.write(f"S {i + 1} {t + 1} {self.status[i][t]}\n")
        for name, table in (("Y", self.startup), ("Z", self.shutdown), ("C", self.cold)):
            for i in range(N):
                for t in range(T):
                    out.write(f"{name} {i + 1} {t + 1} {table[i][t]}\n")
        for i in range(N):
            for t in range(T):
                bv = self.power[i][t]
                out.write(f"PFMT {i + 1} {t + 1} {bv.fmt.n} {bv.fmt.m}\n")
                for k, lit in enumerate(bv.bits, start=1):
                    out.write(f"P {i + 1} {t + 1} {k} {lit}\n")
        out.write(f"OFMT {self.objective.fmt.n} {self.objective.fmt.m}\n")
        for k, lit in enumerate(self.objective.bits, start=1):
            out.write(f"O {k} {lit}\n")


# ---------------------------------------------------------------------------
# discretization


def choose_frac_bits(inst: UcInstance, requested: int | None = None) -> int:
    """Fractional power bits that make every load, limit and ramp rate exact."""
    quantities = list(inst.load)
    for u in inst.units:
        quantities += [u.p_min, u.p_max]
    for r in inst.ramps or ():
        quantities += [r.r_up, r.r_down]
    if requested is not None:
        for q in quantities:
            if (q * 2**requested).denominator != 1:
                need = frac_bits_needed(q, MAX_AUTO_FRAC_BITS)
                hint = f"; needs at least {need} fractional bits" if need is not None else ""
                raise GridError(f"{q} is not representable with {requested} fractional bits{hint}")
        return requested
    m = 0
    for q in quantities:
        need = frac_bits_needed(q, MAX_AUTO_FRAC_BITS)
        if need is None:
            raise GridError(f"{q} has no exact binary fixed-point form within "
                            f"{MAX_AUTO_FRAC_BITS} fractional bits; pass frac_bits explicitly")
        m = max(m, need)
    if m:
        logger.info("%s: using %d fractional power bits", inst.name, m)
    return m


def round_costs(inst: UcInstance, m_cost: int):
    """Cost coefficients snapped to the cost grid, plus a report of what moved."""
    report = []
    rounded = []
    for i, u in enumerate(inst.units):
        changes = {}
        for name in ("a", "b", "c", "c_hot", "c_cold"):
            exact = getattr(u, name)
            snapped = round_to_grid(exact, m_cost)
            changes[name] = snapped
            if snapped != exact:
                report.append((i, name, exact, snapped))
        rounded.append(replace(u, **changes))
    if report:
        worst = max(abs(s - e) for _, _, e, s in report)
        logger.info("%s: %d cost coefficients rounded to 2^-%d (max shift %s)",
                    inst.name, len(report), m_cost, float(worst))
    return tuple(rounded), report


# ---------------------------------------------------------------------------
# constraint encoders


def allocate(inst: UcInstance, options: ReduceOptions) -> EncodedProblem:
    m = choose_frac_bits(inst, options.frac_bits)
    b = CnfBuilder()
    N, T = inst.n_units, inst.horizon
    with b.tagged("status"):
        status = [[b.fresh_var() for _ in range(T)] for _ in range(N)]
        startup = [[b.fresh_var() for _ in range(T)] for _ in range(N)]
        shutdown = [[b.fresh_var() for _ in range(T)] for _ in range(N)]
        cold = [[b.fresh_var() for _ in range(T)] for _ in range(N)]
    with b.tagged("power"):
        power = []
        for u in inst.units:
            fmt = FixedPointFormat.for_value(u.p_max, m)
            power.append([fresh_bitvec(b, fmt) for _ in range(T)])
    widest = max(len(row[0].bits) for row in power) - m
    rounded, report = round_costs(inst, options.cost_frac_bits)
    return EncodedProblem(inst, options, b, FixedPointFormat(max(1, widest), m),
                          status, startup, shutdown, cold, power,
                          rounded_units=rounded, rounding_report=report)


def _initial(ep: EncodedProblem, i: int) -> Literal:
    return ep.builder.const(ep.instance.units[i].init_on)


def _prev_status(ep: EncodedProblem, i: int, t: int) -> Literal:
    return ep.status[i][t - 1] if t > 0 else _initial(ep, i)


def encode_capacity_specialized(ep: EncodedProblem, inst: UcInstance) -> None:
    b = ep.builder
    m = ep.frac_bits
    with b.tagged("capacity"):
        for i, u in enumerate(inst.units):
            lo = const_bitvec(b, u.p_min, m=m)
            hi = const_bitvec(b, u.p_max, m=m)
            for t in range(inst.horizon):
                s, p = ep.status[i][t], ep.power[i][t]
                for bit in p.bits:
                    b.add_clause((s, -bit))
                with b.guarded(-s):
                    if u.p_min > 0:
                        ep.cmp(p, lo, ">=")
                    if to_raw(u.p_max, m) < p.ub:
                        ep.cmp(p, hi, "<=")


def encode_capacity_generic(ep: EncodedProblem, inst: UcInstance) -> None:
    b = ep.builder
    m = ep.frac_bits
    with b.tagged("capacity"):
        for i, u in enumerate(inst.units):
            lo = const_bitvec(b, u.p_min, m=m)
            hi = const_bitvec(b, u.p_max, m=m)
            for t in range(inst.horizon):
                s, p = ep.status[i][t], ep.power[i][t]
                bounds = []
                for c in (lo, hi):
                    product = encode_mul(b, c, bool_bitvec(s))
                    aux = fresh_bitvec(b, product.fmt)
                    encode_eq(b, aux, product)
                    bounds.append(aux)
                ep.cmp(bounds[0], p, "<=")
                ep.cmp(p, bounds[1], "<=")


def encode_balance(ep: EncodedProblem, inst: UcInstance) -> None:
    b = ep.builder
    with b.tagged("balance"):
        for t, load in enumerate(inst.load):
            try:
                target = const_bitvec(b, load, m=ep.frac_bits)
            except GridError:
                raise GridError(f"load {load} at t={t + 1} needs "
                                f"{frac_bits_needed(load)} fractional bits") from None
            total = encode_sum(b, [ep.power[i][t] for i in range(inst.n_units)])
            encode_eq(b, total, target)


def encode_startup_shutdown_link(ep: EncodedProblem, inst: UcInstance) -> None:
    """y <-> (S and not S_prev), z <-> (S_prev and not S)."""
    b = ep.builder
    with b.tagged("link"):
        for i in range(inst.n_units):
            for t in range(inst.horizon):
                s, prev = ep.status[i][t], _prev_status(ep, i, t)
                for out, on, off in ((ep.startup[i][t], s, prev), (ep.shutdown[i][t], prev, s)):
                    b.add_folded((-out, on))
                    b.add_folded((-out, -off))
                    b.add_folded((out, -on, off))


def encode_min_up_down(ep: EncodedProblem, inst: UcInstance) -> None:
    b = ep.builder
    T = inst.horizon
    with b.tagged("min_up_down"):
        for i, u in enumerate(inst.units):
            S = ep.status[i]
            for t in range(T):
                for k in range(t + 1, min(t + u.h_on, T)):
                    b.add_clause((-ep.startup[i][t], S[k]))
                for k in range(t + 1, min(t + u.h_off, T)):
                    b.add_clause((-ep.shutdown[i][t], -S[k]))
            # obligation carried over from before the horizon
            if u.init_on:
                for k in range(min(max(0, u.h_on - u.init_duration), T)):
                    b.add_clause((S[k],))
            else:
                for k in range(min(max(0, u.h_off - u.init_duration), T)):
                    b.add_clause((-S[k],))


def encode_reserve(ep: EncodedProblem, inst: UcInstance) -> None:
    b = ep.builder
    m = ep.frac_bits
    with b.tagged("reserve"):
        for t in range(inst.horizon):
            need = inst.reserve_requirement(t)
            if need == 0:
                continue
            # committed capacity lies on the grid, so comparing with the ceiling is exact
            threshold = const_bitvec(b, round_to_grid(need, m, "ceil"), m=m)
            spin = encode_sum(b, [
                _mux(b, const_bitvec(b, u.p_max, m=m), ep.status[i][t])
                for i, u in enumerate(inst.units)
            ])
            ep.cmp(spin, threshold, ">=")


def _mux(b: CnfBuilder, c: BitVec, lit: Literal) -> BitVec:
    return encode_mul(b, c, bool_bitvec(lit))


def encode_ramping(ep: EncodedProblem, inst: UcInstance) -> None:
    """Case-split ramp limits for t >= 2; the transition from the initial state is free."""
    if inst.ramps is None:
        return
    b = ep.builder
    m = ep.frac_bits
    with b.tagged("ramping"):
        for i, (u, r) in enumerate(zip(inst.units, inst.ramps)):
            P, S = ep.power[i], ep.status[i]
            p_up = const_bitvec(b, r.p_up, m=m)
            p_down = const_bitvec(b, r.p_down, m=m)
            up = const_bitvec(b, r.r_up, m=m)
            down = const_bitvec(b, r.r_down, m=m)
            span = u.p_max - u.p_min
            for t in range(1, inst.horizon):
                # running -> running; skipped when capacity already implies the limit
                if r.r_up < span:
                    ceiling = encode_add(b, P[t - 1], up)
                    with b.guarded(-S[t - 1], -S[t]):
                        ep.cmp(P[t], ceiling, "<=")
                if r.r_down < span:
                    floor_ = encode_add(b, P[t], down)
                    with b.guarded(-S[t - 1], -S[t]):
                        ep.cmp(P[t - 1], floor_, "<=")
                if r.p_up < u.p_max:
                    with b.guarded(-ep.startup[i][t]):
                        ep.cmp(P[t], p_up, "<=")
                if r.p_down < u.p_max:
                    with b.guarded(-ep.shutdown[i][t]):
                        ep.cmp(P[t - 1], p_down, "<=")


def encode_cold_indicator(ep: EncodedProblem, inst: UcInstance) -> None:
    """cold <-> startup after at least ``h_off + t_cold`` consecutive off periods."""
    b = ep.builder
    with b.tagged("cold"):
        for i, u in enumerate(inst.units):
            k = u.cold_window
            S = ep.status[i]
            for t in range(inst.horizon):
                cold, y = ep.cold[i][t], ep.startup[i][t]
                lits = [y] + [-S[j] for j in range(max(0, t - k), t)]
                history_ok = True
                if t < k:
                    # the window reaches before the horizon: the initial state must cover it
                    history_ok = (not u.init_on) and u.init_duration >= k - t
                if not history_ok:
                    b.add_clause((-cold,))
                    continue
                for lit in lits:
                    b.add_clause((-cold, lit))
                b.add_clause((cold,) + tuple(-lit for lit in lits))


def encode_objective(ep: EncodedProblem, inst: UcInstance) -> BitVec:
    """Discretized total cost.

    Each coefficient multiplies a per-unit sum over the horizon (for instance
    ``c * sum_t P_t**2``), which equals the per-period sum and needs one
    constant multiplier per unit and term instead of one per period.
    """
    b = ep.builder
    mc = ep.options.cost_frac_bits
    terms = []
    with b.tagged("objective"):
        for i, c in enumerate(ep.rounded_units):
            P = ep.power[i]
            parts = (
                (c.a, lambda: [bool_bitvec(s) for s in ep.status[i]]),
                (c.b, lambda: list(P)),
                (c.c, lambda: [encode_square(b, p) for p in P]),
                (c.c_hot, lambda: [bool_bitvec(y) for y in ep.startup[i]]),
                (c.c_cold - c.c_hot, lambda: [bool_bitvec(x) for x in ep.cold[i]]),
            )
            for coef, build in parts:
                if coef == 0:
                    continue
                total = encode_sum(b, build())
                terms.append(encode_mul(b, const_bitvec(b, coef, m=mc), total))
        objective = encode_sum(b, terms)
    ep.objective = objective
    return objective


def reduce(inst: UcInstance, options: ReduceOptions | None = None, **kw) -> EncodedProblem:
    """Run every applicable encoder and return the encoded problem."""
    options = options or ReduceOptions(**kw)
    ep = allocate(inst, options)
    if options.capacity == "specialized":
        encode_capacity_specialized(ep, inst)
    else:
        encode_capacity_generic(ep, inst)
    encode_balance(ep, inst)
    encode_startup_shutdown_link(ep, inst)
    encode_min_up_down(ep, inst)
    encode_reserve(ep, inst)
    if inst.ramps is not None:
        encode_ramping(ep, inst)
    encode_cold_indicator(ep, inst)
    encode_objective(ep, inst)
    logger.debug("%s: %d vars, %d clauses", inst.name, ep.builder.num_vars, ep.builder.num_clauses)
    return ep
