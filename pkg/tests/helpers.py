"""Shared test utilities: pinning bit-vectors, solving, and an independent schedule simulator."""

from fractions import Fraction

from pysat.solvers import Solver


def pin(bv, raw):
    """Assumption literals fixing ``bv`` to the raw integer ``raw``."""
    w = len(bv.bits)
    return [lit if raw >> (w - 1 - k) & 1 else -lit for k, lit in enumerate(bv.bits)]


def solve(clauses, assumptions=()):
    with Solver("minisat22", bootstrap_with=clauses) as s:
        ok = s.solve(assumptions=list(assumptions))
        return ok, (s.get_model() if ok else None)


class Incremental:
    """One solver over a fixed CNF, queried under many assumption sets."""

    def __init__(self, clauses):
        self.s = Solver("minisat22", bootstrap_with=clauses)

    def __call__(self, assumptions):
        ok = self.s.solve(assumptions=list(assumptions))
        return ok, (self.s.get_model() if ok else None)

    def close(self):
        self.s.delete()


def simulate(inst, status, power, costs=None):
    """Second, separately written schedule checker.

    Walks each unit once and tracks run lengths directly instead of building
    counter arrays. Returns ``(cost, None)`` or ``(None, reason)``.
    """
    N, T = inst.n_units, inst.horizon
    costs = costs or inst.units
    for t in range(T):
        if sum(Fraction(power[i][t]) for i in range(N)) != inst.load[t]:
            return None, "balance"
        if sum(u.p_max for u, row in zip(inst.units, status) if row[t]) < inst.load[t] * inst.reserve_factor:
            return None, "reserve"
    total = Fraction(0)
    for i, u in enumerate(inst.units):
        run = u.init_duration
        state = u.init_on
        for t in range(T):
            s, p = status[i][t], Fraction(power[i][t])
            if s and not (u.p_min <= p <= u.p_max) or not s and p != 0:
                return None, "capacity"
            if s != state:
                if state and run < u.h_on:
                    return None, "min_up"
                if not state and run < u.h_off:
                    return None, "min_down"
                if s:
                    total += costs[i].c_cold if run >= u.h_off + u.t_cold else costs[i].c_hot
                state, run = s, 1
            else:
                run += 1
            if s:
                total += costs[i].a + costs[i].b * p + costs[i].c * p * p
            if inst.ramps is not None and t > 0:
                r = inst.ramps[i]
                prev_s, prev_p = status[i][t - 1], Fraction(power[i][t - 1])
                if prev_s and s and not (-r.r_down <= p - prev_p <= r.r_up):
                    return None, "ramp"
                if s and not prev_s and p > r.p_up:
                    return None, "ramp"
                if prev_s and not s and prev_p > r.p_down:
                    return None, "ramp"
    return total, None
