"""Brute-force optimum for tiny instances on the power grid.

Enumerates every status matrix, filters it with duration counters, and
dispatches power exhaustively: per period for the classical model, by dynamic
programming over periods when ramp limits couple them. Costs use the same
rounded coefficients as the SAT encoding, so the optimum is directly
comparable with the optimizer's objective.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from types import SimpleNamespace

from .circuits import round_to_grid
from .model import Schedule, UcInstance

DEFAULT_CEILING = 2**22


class SearchSpaceTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleResult:
    cost: Fraction | None
    schedule: Schedule | None
    matrices_checked: int = 0

    @property
    def feasible(self) -> bool:
        return self.cost is not None


def _grid(lo: Fraction, hi: Fraction, step: Fraction) -> list[Fraction]:
    out = []
    k = -(-lo // step)  # ceil
    while k * step <= hi:
        out.append(k * step)
        k += 1
    return out


def _status_ok(unit, row) -> bool:
    on_run = unit.init_duration if unit.init_on else 0
    off_run = 0 if unit.init_on else unit.init_duration
    prev = unit.init_on
    for s in row:
        if prev and not s and on_run < unit.h_on:
            return False
        if s and not prev and off_run < unit.h_off:
            return False
        if s:
            on_run, off_run = on_run + 1, 0
        else:
            on_run, off_run = 0, off_run + 1
        prev = s
    return True


def _startup_cost(unit, price, row) -> Fraction:
    total = Fraction(0)
    off_run = 0 if unit.init_on else unit.init_duration
    prev = unit.init_on
    for s in row:
        if s and not prev:
            total += price.c_cold if off_run >= unit.h_off + unit.t_cold else price.c_hot
        off_run = 0 if s else off_run + 1
        prev = s
    return total


def oracle_solve(inst: UcInstance, frac_bits: int = 0, cost_frac_bits: int = 7,
                 ceiling: int = DEFAULT_CEILING) -> OracleResult:
    N, T = inst.n_units, inst.horizon
    step = Fraction(1, 2**frac_bits)
    levels = [_grid(u.p_min, u.p_max, step) for u in inst.units]
    size = 2 ** (N * T) * max(1, max(len(lv) for lv in levels)) ** N
    if size > ceiling:
        raise SearchSpaceTooLarge(f"search space {size} exceeds ceiling {ceiling}")

    prices = [SimpleNamespace(**{k: round_to_grid(getattr(u, k), cost_frac_bits)
                                 for k in ("a", "b", "c", "c_hot", "c_cold")})
              for u in inst.units]

    def run_cost(i, p):
        return prices[i].b * p + prices[i].c * p * p

    # per-unit admissible status rows
    rows = []
    for u in inst.units:
        rows.append([r for r in itertools.product((False, True), repeat=T) if _status_ok(u, r)])

    @lru_cache(maxsize=None)
    def dispatch(t: int, on: tuple[bool, ...]):
        """Cheapest power vector meeting load at t with the given units on."""
        table = {Fraction(0): (Fraction(0), ())}
        for i in range(N):
            opts = levels[i] if on[i] else [Fraction(0)]
            nxt = {}
            for total, (cost, vec) in table.items():
                for p in opts:
                    key = total + p
                    if key > inst.load[t]:
                        continue
                    cand = (cost + (run_cost(i, p) if on[i] else 0), vec + (p,))
                    if key not in nxt or cand[0] < nxt[key][0]:
                        nxt[key] = cand
            table = nxt
        return table.get(inst.load[t])

    @lru_cache(maxsize=None)
    def vectors(t: int, on: tuple[bool, ...]):
        """All power vectors meeting load at t (ramping case)."""
        opts = [levels[i] if on[i] else [Fraction(0)] for i in range(N)]
        return [v for v in itertools.product(*opts) if sum(v) == inst.load[t]]

    def ramp_ok(i, s_prev, s_now, p_prev, p_now):
        r = inst.ramps[i]
        y = int(s_now and not s_prev)
        z = int(s_prev and not s_now)
        return (p_now - p_prev <= int(s_prev) * r.r_up + y * r.p_up
                and p_prev - p_now <= int(s_now) * r.r_down + z * r.p_down)

    @lru_cache(maxsize=None)
    def tail(t: int, status_cols: tuple, p_prev: tuple):
        """Cheapest dispatch for periods t.. given the previous power vector."""
        if t == T:
            return Fraction(0), ()
        on = status_cols[t]
        best = None
        for vec in vectors(t, on):
            if t > 0 and not all(ramp_ok(i, status_cols[t - 1][i], on[i], p_prev[i], vec[i])
                                 for i in range(N)):
                continue
            rest = tail(t + 1, status_cols, vec)
            if rest is None:
                continue
            cost = sum((run_cost(i, vec[i]) for i in range(N) if on[i]), Fraction(0)) + rest[0]
            if best is None or cost < best[0]:
                best = (cost, (vec,) + rest[1])
        return best

    best = None
    checked = 0
    for choice in itertools.product(*rows):
        checked += 1
        cols = tuple(tuple(choice[i][t] for i in range(N)) for t in range(T))
        if any(sum((u.p_max for u, s in zip(inst.units, col) if s), Fraction(0))
               < inst.reserve_requirement(t) for t, col in enumerate(cols)):
            continue
        fixed = sum((prices[i].a * sum(choice[i]) + _startup_cost(u, prices[i], choice[i])
                     for i, u in enumerate(inst.units)), Fraction(0))
        if best is not None and fixed >= best[0]:
            continue
        if inst.ramps is None:
            per = [dispatch(t, cols[t]) for t in range(T)]
            if any(p is None for p in per):
                continue
            cost = fixed + sum((p[0] for p in per), Fraction(0))
            power_cols = [p[1] for p in per]
        else:
            res = tail(0, cols, ())
            if res is None:
                continue
            cost = fixed + res[0]
            power_cols = list(res[1])
        if best is None or cost < best[0]:
            best = (cost, choice, power_cols)

    if best is None:
        return OracleResult(None, None, checked)
    cost, choice, power_cols = best
    power = [[power_cols[t][i] for t in range(T)] for i in range(N)]
    return OracleResult(cost, Schedule(choice, power, cost, None), checked)
