import io
import itertools
import random
from fractions import Fraction

import pytest

from ucsat.circuits import GridError, decode
from ucsat.model import RampParams, UcInstance, UnitParams, evaluate_exact, parse_instance
from ucsat.reduction import ReduceOptions, choose_frac_bits, reduce, round_costs

from helpers import Incremental, pin, solve


def unit(**kw):
    base = dict(p_min=1, p_max=3, a=1, b=1, c=0, c_hot=2, c_cold=5, t_cold=1, h_on=1, h_off=1,
                init_on=False, init_duration=2)
    base.update(kw)
    return UnitParams(**base)


def pin_schedule(ep, S, P):
    lits = []
    for i in range(ep.instance.n_units):
        for t in range(ep.instance.horizon):
            lits.append(ep.status[i][t] if S[i][t] else -ep.status[i][t])
            raw = int(Fraction(P[i][t]) * 2**ep.frac_bits)
            lits += pin(ep.power[i][t], raw)
    return lits


def all_schedules(inst, m=0):
    """Every status matrix with every on-grid power level (p_max kept tiny by callers)."""
    step = Fraction(1, 2**m)
    per_unit = []
    for u in inst.units:
        rows = []
        for S in itertools.product((False, True), repeat=inst.horizon):
            levels = [[Fraction(0)] if not s else
                      [u.p_min + k * step for k in range(int((u.p_max - u.p_min) / step) + 1)]
                      for s in S]
            for P in itertools.product(*levels):
                rows.append((S, P))
        per_unit.append(rows)
    for combo in itertools.product(*per_unit):
        yield [c[0] for c in combo], [c[1] for c in combo]


# ---------------------------------------------------------------------------


@pytest.mark.parametrize("capacity", ["specialized", "generic"])
def test_capacity_bounds_exhaustive(capacity):
    u = unit(p_min=Fraction(3, 2), p_max=Fraction(7, 2))
    for raw in range(8):
        value = Fraction(raw, 2)
        inst = UcInstance([u], [value], reserve_factor=0)
        ep = reduce(inst, frac_bits=1, capacity=capacity)
        s, p = ep.status[0][0], ep.power[0][0]
        on_ok = solve(ep.builder.clauses, [s] + pin(p, raw))[0]
        off_ok = solve(ep.builder.clauses, [-s] + pin(p, raw))[0]
        assert on_ok == (Fraction(3, 2) <= value <= Fraction(7, 2))
        assert off_ok == (value == 0)


def test_specialized_is_smaller_than_generic():
    inst = parse_instance("UC 1\nN 2\nT 3\nE 1\nLOAD 5 6 7\n"
                          "UNIT 1 2 6 1 1 0 1 2 1 1 1 0 2\nUNIT 2 1 5 1 1 0 1 2 1 1 1 0 2\n")
    spec = reduce(inst, capacity="specialized")
    gen = reduce(inst, capacity="generic")
    assert spec.builder.num_vars < gen.builder.num_vars
    assert spec.builder.num_clauses < gen.builder.num_clauses


def test_startup_shutdown_table():
    u = unit(p_min=0, init_on=False, init_duration=5)
    inst = UcInstance([u], [0, 0], reserve_factor=0)
    ep = reduce(inst)
    S, Y, Z = ep.status[0], ep.startup[0], ep.shutdown[0]
    for prev, cur in itertools.product((False, True), repeat=2):
        ok, model = solve(ep.builder.clauses, [S[0] if prev else -S[0], S[1] if cur else -S[1]])
        assert ok
        assert (model[Y[1] - 1] > 0) == (cur and not prev)
        assert (model[Z[1] - 1] > 0) == (prev and not cur)


@pytest.mark.parametrize("T", range(1, 7))
def test_windows_match_duration_counters(T):
    for h_on, h_off, init_on, dur in itertools.product((1, 2, 3), (1, 2, 3), (False, True), (0, 1, 2, 4)):
        u = unit(p_min=0, p_max=1, h_on=h_on, h_off=h_off, t_cold=1, init_on=init_on, init_duration=dur)
        inst = UcInstance([u], [0] * T, reserve_factor=0)
        ep = reduce(inst)
        inc = Incremental(ep.builder.clauses)
        for row in itertools.product((False, True), repeat=T):
            lits = [s if on else -s for s, on in zip(ep.status[0], row)]
            ok, model = inc(lits)
            ev = evaluate_exact(inst, [row], [[0] * T])
            assert ok == ev.feasible, (h_on, h_off, init_on, dur, row, ev.violation)
            if ok:
                cold = tuple(model[c - 1] > 0 for c in ep.cold[0])
                assert cold == tuple(k == "cold" for k in ev.startups[0])
        inc.close()


def test_reserve_threshold():
    units = [unit(p_min=1, p_max=3), unit(p_min=1, p_max=2)]
    inst = UcInstance(units, [2], reserve_factor=2)
    ep = reduce(inst)
    S = [ep.status[0][0], ep.status[1][0]]
    assert not solve(ep.builder.clauses, [S[0], -S[1]])[0]
    assert not solve(ep.builder.clauses, [-S[0], S[1]])[0]
    assert solve(ep.builder.clauses, [S[0], S[1]])[0]


def test_classical_has_no_ramping_clauses():
    inst = UcInstance([unit()], [1, 2], reserve_factor=0)
    assert "ramping" not in reduce(inst).stats()["by_tag"]


def test_ramping_running_limit():
    u = unit(p_min=1, p_max=8, init_on=True, init_duration=3)
    inst = UcInstance([u], [1, 3], reserve_factor=0, ramps=[RampParams.for_unit(u, 2, 2)])
    ep = reduce(inst)
    assert "ramping" in ep.stats()["by_tag"]
    assert solve(ep.builder.clauses)[0]
    inst = UcInstance([u], [1, 4], reserve_factor=0, ramps=[RampParams.for_unit(u, 2, 2)])
    assert not solve(reduce(inst).builder.clauses)[0]


def test_ramping_startup_limit():
    u = unit(p_min=2, p_max=8, init_on=False, init_duration=3)
    r = RampParams.for_unit(u, 8, 8)
    inst = UcInstance([u], [0, 3], reserve_factor=0, ramps=[r])
    assert not solve(reduce(inst).builder.clauses)[0]
    inst = UcInstance([u], [0, 2], reserve_factor=0, ramps=[r])
    assert solve(reduce(inst).builder.clauses)[0]


def test_first_period_is_not_ramp_limited():
    u = unit(p_min=1, p_max=8, init_on=True, init_duration=3)
    inst = UcInstance([u], [8], reserve_factor=0, ramps=[RampParams.for_unit(u, 1, 1)])
    assert solve(reduce(inst).builder.clauses)[0]


def _tiny_instances(rng, count, ramps):
    for _ in range(count):
        n = rng.randint(1, 2)
        T = rng.randint(1, 3)
        units = []
        for _ in range(n):
            p_max = rng.randint(1, 3)
            units.append(unit(p_min=rng.randint(0, p_max), p_max=p_max, a=Fraction(rng.randint(0, 20), 8),
                              b=Fraction(rng.randint(0, 30), 7), c=Fraction(rng.randint(0, 8), 16),
                              c_hot=rng.randint(0, 3), c_cold=rng.randint(3, 6), t_cold=rng.randint(0, 2),
                              h_on=rng.randint(1, 2), h_off=rng.randint(1, 2),
                              init_on=rng.random() < 0.5, init_duration=rng.randint(0, 3)))
        rp = [RampParams.for_unit(u, rng.randint(0, 2), rng.randint(0, 2)) for u in units] if ramps else None
        cap = int(sum(u.p_max for u in units))
        yield UcInstance(units, [rng.randint(0, cap) for _ in range(T)],
                         Fraction(rng.randint(0, 5), 4), rp)


@pytest.mark.parametrize("ramps", [False, True])
@pytest.mark.parametrize("options", [ReduceOptions(), ReduceOptions("generic", "tseitin")])
def test_encoding_equals_model_exhaustively(ramps, options):
    """CNF under pinned (S, P) is satisfiable exactly when the schedule is feasible,
    and the objective bits then read back the cost under rounded coefficients."""
    rng = random.Random(11 + ramps)
    feasible_seen = 0
    for inst in _tiny_instances(rng, 25, ramps):
        ep = reduce(inst, options)
        inc = Incremental(ep.builder.clauses)
        for S, P in all_schedules(inst):
            ok, model = inc(pin_schedule(ep, S, P))
            ev = evaluate_exact(inst, S, P, costs=ep.rounded_units)
            assert ok == ev.feasible, (inst, S, P, ev.violation)
            if ok:
                feasible_seen += 1
                assert decode(ep.objective, model) == ev.cost
        inc.close()
    assert feasible_seen > 20


def test_fractional_grid_completeness():
    u = unit(p_min=Fraction(1, 2), p_max=Fraction(3, 2), c=Fraction(1, 4))
    inst = UcInstance([u, u], [Fraction(3, 2), 2], reserve_factor=0)
    ep = reduce(inst)
    assert ep.frac_bits == 1
    inc = Incremental(ep.builder.clauses)
    count = 0
    for S, P in all_schedules(inst, m=1):
        ok, model = inc(pin_schedule(ep, S, P))
        ev = evaluate_exact(inst, S, P, costs=ep.rounded_units)
        assert ok == ev.feasible
        if ok:
            count += 1
            assert decode(ep.objective, model) == ev.cost
    inc.close()
    assert count


def test_frac_bits_choice():
    inst = UcInstance([unit(p_min=Fraction(1, 4), p_max=3)], [Fraction(5, 2)], reserve_factor=0)
    assert choose_frac_bits(inst) == 2
    with pytest.raises(GridError, match="2 fractional bits"):
        choose_frac_bits(inst, 1)
    bad = UcInstance([unit()], [Fraction(1, 3)], reserve_factor=0)
    with pytest.raises(GridError):
        reduce(bad)


def test_cost_rounding_report():
    inst = UcInstance([unit(a=Fraction(1, 3), b=Fraction(1, 2))], [1], reserve_factor=0)
    rounded, report = round_costs(inst, 7)
    assert rounded[0].a == Fraction(43, 128)
    assert rounded[0].b == Fraction(1, 2)
    assert [(i, name) for i, name, _, _ in report] == [(0, "a")]


def test_map_file_lists_every_literal():
    inst = UcInstance([unit(), unit(p_max=2)], [1, 2, 3], reserve_factor=0)
    ep = reduce(inst)
    out = io.StringIO()
    ep.write_map(out)
    lines = out.getvalue().splitlines()
    kinds = [line.split()[0] for line in lines]
    assert kinds.count("S") == 6
    assert kinds.count("Y") == kinds.count("Z") == kinds.count("C") == 6
    assert kinds.count("PFMT") == 6
    assert kinds.count("O") == len(ep.objective.bits)
    assert f"S 2 3 {ep.status[1][2]}" in lines
    assert f"O 1 {ep.objective.bits[0]}" in lines


def test_reduce_is_deterministic():
    inst = parse_instance("UC 1\nN 2\nT 3\nE 1.1\nLOAD 5 6 7\n"
                          "UNIT 1 2 6 1.5 1.3 0.01 1 2 1 2 1 0 2\nUNIT 2 1 5 1 1 0 1 2 1 1 1 1 2\n"
                          "RAMP 1 3 3\nRAMP 2 2 2\n")
    a = reduce(inst).builder.export_dimacs()
    b = reduce(inst).builder.export_dimacs()
    assert a == b


def test_bad_options():
    with pytest.raises(ValueError):
        ReduceOptions(capacity="bogus")
    with pytest.raises(ValueError):
        ReduceOptions(cmp="bogus")
