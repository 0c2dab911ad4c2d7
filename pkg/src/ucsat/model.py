"""Unit commitment instances, the instance file format, and exact schedule evaluation.

All numeric data are held as :class:`fractions.Fraction` so that evaluation is
exact. Decimal strings in instance files are parsed directly into fractions.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class InstanceError(ValueError):
    """Raised for malformed or semantically invalid instance data."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class UnitParams:
    p_min: Fraction
    p_max: Fraction
    a: Fraction
    b: Fraction
    c: Fraction
    c_hot: Fraction
    c_cold: Fraction
    t_cold: int
    h_on: int
    h_off: int
    init_on: bool = False
    init_duration: int = 0

    def __post_init__(self):
        for name in ("p_min", "p_max", "a", "b", "c", "c_hot", "c_cold"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.p_min < 0:
            raise InstanceError("p_min must be non-negative", field="p_min")
        if self.p_min > self.p_max:
            raise InstanceError(f"p_min {self.p_min} exceeds p_max {self.p_max}", field="p_min")
        for name in ("a", "b", "c", "c_hot", "c_cold"):
            if getattr(self, name) < 0:
                raise InstanceError(f"cost coefficient {name} must be non-negative", field=name)
        if self.c_hot > self.c_cold:
            raise InstanceError("c_hot must not exceed c_cold", field="c_hot")
        if self.h_on < 1:
            raise InstanceError("h_on must be at least 1", field="h_on")
        if self.h_off < 1:
            raise InstanceError("h_off must be at least 1", field="h_off")
        if self.t_cold < 0:
            raise InstanceError("t_cold must be non-negative", field="t_cold")
        if self.init_duration < 0:
            raise InstanceError("init_duration must be non-negative", field="init_duration")

    @property
    def cold_window(self) -> int:
        """Off-periods needed before a startup counts as cold."""
        return self.h_off + self.t_cold


@dataclass(frozen=True)
class RampParams:
    r_up: Fraction
    r_down: Fraction
    p_up: Fraction
    p_down: Fraction

    def __post_init__(self):
        for name in ("r_up", "r_down", "p_up", "p_down"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.r_up < 0 or self.r_down < 0:
            raise InstanceError("ramp rates must be non-negative", field="r_up")

    @classmethod
    def for_unit(cls, unit: UnitParams, r_up, r_down) -> "RampParams":
        # startup/shutdown ramp power is pinned to p_min
        return cls(Fraction(r_up), Fraction(r_down), unit.p_min, unit.p_min)


@dataclass(frozen=True)
class UcInstance:
    units: tuple[UnitParams, ...]
    load: tuple[Fraction, ...]
    reserve_factor: Fraction = Fraction(1)
    ramps: tuple[RampParams, ...] | None = None
    name: str = "instance"

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "load", tuple(Fraction(x) for x in self.load))
        object.__setattr__(self, "reserve_factor", Fraction(self.reserve_factor))
        if self.ramps is not None:
            object.__setattr__(self, "ramps", tuple(self.ramps))
            if len(self.ramps) != len(self.units):
                raise InstanceError("ramp block incomplete", field="ramps")
            for unit, ramp in zip(self.units, self.ramps):
                if ramp.p_up != unit.p_min or ramp.p_down != unit.p_min:
                    raise InstanceError("startup/shutdown ramp power must equal p_min", field="ramps")
        if not self.units:
            raise InstanceError("instance needs at least one unit", field="N")
        if not self.load:
            raise InstanceError("instance needs at least one period", field="T")
        if any(r < 0 for r in self.load):
            raise InstanceError("load values must be non-negative", field="LOAD")
        if self.reserve_factor < 0:
            raise InstanceError("reserve factor must be non-negative", field="E")
        cap = sum((u.p_max for u in self.units), Fraction(0))
        need = max(self.load) * self.reserve_factor
        if cap < need:
            logger.warning(
                "%s: total capacity %s below peak reserve requirement %s; instance is infeasible",
                self.name, cap, need,
            )

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def horizon(self) -> int:
        return len(self.load)

    @property
    def has_ramping(self) -> bool:
        return self.ramps is not None

    def reserve_requirement(self, t: int) -> Fraction:
        return self.load[t] * self.reserve_factor


@dataclass(frozen=True)
class Schedule:
    status: tuple[tuple[bool, ...], ...]
    power: tuple[tuple[Fraction, ...], ...]
    obj_discrete: Fraction | None = None
    obj_exact: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "status", tuple(tuple(bool(s) for s in row) for row in self.status))
        object.__setattr__(self, "power", tuple(tuple(Fraction(p) for p in row) for row in self.power))
        for srow, prow in zip(self.status, self.power):
            for s, p in zip(srow, prow):
                if not s and p != 0:
                    raise ValueError("power must be zero while a unit is off")

    def to_dict(self) -> dict:
        return {
            "status": [[int(s) for s in row] for row in self.status],
            "power": [[_num(p) for p in row] for row in self.power],
            "obj_discrete": None if self.obj_discrete is None else _num(self.obj_discrete),
            "obj_exact": None if self.obj_exact is None else _num(self.obj_exact),
        }


def _num(x: Fraction):
    return int(x) if x.denominator == 1 else float(x)


# ---------------------------------------------------------------------------
# instance file format

_INT = re.compile(r"^[+-]?\d+$")
_DEC = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def _dec(tok: str, lineno: int, name: str) -> Fraction:
    if not _DEC.match(tok):
        raise InstanceError(f"expected a decimal number for {name}, got {tok!r}", lineno, name)
    return Fraction(tok)


def _int(tok: str, lineno: int, name: str) -> int:
    if not _INT.match(tok):
        raise InstanceError(f"expected an integer for {name}, got {tok!r}", lineno, name)
    return int(tok)


_UNIT_FIELDS = ("p_min", "p_max", "a", "b", "c", "c_hot", "c_cold",
                "t_cold", "h_on", "h_off", "init_on", "init_duration")


def parse_instance(text: str | Iterable[str], name: str = "instance") -> UcInstance:
    """Parse the line-oriented instance format.

    The variant is chosen by the presence of ``RAMP`` lines: when any unit has
    one, every unit must.
    """
    lines = text.splitlines() if isinstance(text, str) else list(text)
    version = n = horizon = None
    reserve = None
    load = None
    units: dict[int, tuple[int, UnitParams]] = {}
    ramps: dict[int, tuple[int, tuple[Fraction, Fraction]]] = {}

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        key = key.upper()
        if key == "UC":
            if len(args) != 1:
                raise InstanceError("UC takes one version number", lineno, "UC")
            version = _int(args[0], lineno, "UC")
            if version != FORMAT_VERSION:
                raise InstanceError(f"unsupported format version {version}", lineno, "UC")
        elif key in ("N", "T"):
            if len(args) != 1:
                raise InstanceError(f"{key} takes one integer", lineno, key)
            value = _int(args[0], lineno, key)
            if value < 1:
                raise InstanceError(f"{key} must be positive", lineno, key)
            if key == "N":
                n = value
            else:
                horizon = value
        elif key == "E":
            if len(args) != 1:
                raise InstanceError("E takes one decimal", lineno, "E")
            reserve = _dec(args[0], lineno, "E")
        elif key == "LOAD":
            load = [_dec(tok, lineno, "LOAD") for tok in args]
            load_line = lineno
        elif key == "UNIT":
            if len(args) != 1 + len(_UNIT_FIELDS):
                raise InstanceError(
                    f"UNIT needs {1 + len(_UNIT_FIELDS)} fields, got {len(args)}", lineno, "UNIT")
            idx = _int(args[0], lineno, "idx")
            vals = args[1:]
            kw = {}
            for fname, tok in zip(_UNIT_FIELDS, vals):
                if fname in ("t_cold", "h_on", "h_off", "init_duration"):
                    kw[fname] = _int(tok, lineno, fname)
                elif fname == "init_on":
                    if tok not in ("0", "1"):
                        raise InstanceError("init_on must be 0 or 1", lineno, "init_on")
                    kw[fname] = tok == "1"
                else:
                    kw[fname] = _dec(tok, lineno, fname)
            if idx in units:
                raise InstanceError(f"duplicate UNIT {idx}", lineno, "UNIT")
            try:
                units[idx] = (lineno, UnitParams(**kw))
            except InstanceError as exc:
                raise InstanceError(str(exc), lineno, exc.field) from None
        elif key == "RAMP":
            if len(args) != 3:
                raise InstanceError("RAMP needs idx r_up r_down", lineno, "RAMP")
            idx = _int(args[0], lineno, "idx")
            if idx in ramps:
                raise InstanceError(f"duplicate RAMP {idx}", lineno, "RAMP")
            ramps[idx] = (lineno, (_dec(args[1], lineno, "r_up"), _dec(args[2], lineno, "r_down")))
        else:
            raise InstanceError(f"unknown keyword {key!r}", lineno, key)

    for required, value in (("UC", version), ("N", n), ("T", horizon), ("E", reserve), ("LOAD", load)):
        if value is None:
            raise InstanceError(f"missing {required} line", field=required)
    if len(load) != horizon:
        raise InstanceError(f"LOAD has {len(load)} entries but T = {horizon}", load_line, "LOAD")
    if sorted(units) != list(range(1, n + 1)):
        raise InstanceError(f"expected UNIT lines 1..{n}, got {sorted(units)}", field="UNIT")
    unit_list = [units[i][1] for i in range(1, n + 1)]

    ramp_list = None
    if ramps:
        if sorted(ramps) != list(range(1, n + 1)):
            raise InstanceError("ramp block incomplete", field="RAMP")
        ramp_list = []
        for i, unit in enumerate(unit_list, start=1):
            lineno, (r_up, r_down) = ramps[i]
            try:
                ramp_list.append(RampParams.for_unit(unit, r_up, r_down))
            except InstanceError as exc:
                raise InstanceError(str(exc), lineno, exc.field) from None

    return UcInstance(unit_list, load, reserve, ramp_list, name=name)


def read_instance(path) -> UcInstance:
    from pathlib import Path

    path = Path(path)
    return parse_instance(path.read_text(encoding="utf-8"), name=path.stem)


def _fmt(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    # terminating decimals print exactly; anything else falls back to a/b-free float text
    d = x.denominator
    k = 0
    while d % 2 == 0:
        d //= 2
        k += 1
    j = 0
    while d % 5 == 0:
        d //= 5
        j += 1
    if d != 1:
        raise ValueError(f"{x} has no finite decimal expansion")
    digits = max(k, j)
    scaled = x * 10**digits
    s = f"{scaled.numerator:0{digits + 1}d}"
    return (s[:-digits] + "." + s[-digits:]).rstrip("0").rstrip(".")


def format_instance(inst: UcInstance) -> str:
    out = [f"# {inst.name}", f"UC {FORMAT_VERSION}", f"N {inst.n_units}", f"T {inst.horizon}",
           f"E {_fmt(inst.reserve_factor)}", "LOAD " + " ".join(_fmt(r) for r in inst.load)]
    for i, u in enumerate(inst.units, start=1):
        out.append(
            f"UNIT {i} {_fmt(u.p_min)} {_fmt(u.p_max)} {_fmt(u.a)} {_fmt(u.b)} {_fmt(u.c)} "
            f"{_fmt(u.c_hot)} {_fmt(u.c_cold)} {u.t_cold} {u.h_on} {u.h_off} "
            f"{int(u.init_on)} {u.init_duration}"
        )
    if inst.ramps is not None:
        for i, r in enumerate(inst.ramps, start=1):
            out.append(f"RAMP {i} {_fmt(r.r_up)} {_fmt(r.r_down)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# exact evaluation


@dataclass(frozen=True)
class Violation:
    constraint: str
    unit: int | None
    period: int | None
    detail: str = ""

    def __str__(self):
        where = []
        if self.unit is not None:
            where.append(f"unit {self.unit}")
        if self.period is not None:
            where.append(f"t={self.period}")
        loc = f" at {', '.join(where)}" if where else ""
        return f"{self.constraint} violated{loc}: {self.detail}".rstrip(": ")


@dataclass(frozen=True)
class Evaluation:
    cost: Fraction | None
    violation: Violation | None = None
    startups: tuple[tuple[str | None, ...], ...] = field(default=())

    @property
    def feasible(self) -> bool:
        return self.violation is None


def duration_counters(unit: UnitParams, status: Sequence[bool]) -> tuple[list[int], list[int]]:
    """On/off duration counters; index 0 is the initial state before the first period."""
    x_on = [unit.init_duration if unit.init_on else 0]
    x_off = [0 if unit.init_on else unit.init_duration]
    for s in status:
        x_on.append(x_on[-1] + 1 if s else 0)
        x_off.append(0 if s else x_off[-1] + 1)
    return x_on, x_off


def evaluate_exact(inst: UcInstance, status, power, costs: Sequence[UnitParams] | None = None) -> Evaluation:
    """Check every constraint and return the exact cost, or the first violation.

    Constraints are checked in a fixed order (capacity, balance, minimum
    up/down, reserve, ramping), periods ascending, units ascending. ``costs``
    optionally substitutes cost coefficients (used to price a schedule under
    rounded coefficients) while the operating limits still come from ``inst``.
    """
    N, T = inst.n_units, inst.horizon
    if len(status) != N or len(power) != N or any(len(r) != T for r in status) \
            or any(len(r) != T for r in power):
        raise ValueError(f"status and power must be {N}x{T}")
    S = [[bool(s) for s in row] for row in status]
    P = [[Fraction(p) for p in row] for row in power]
    price = costs if costs is not None else inst.units

    for i, u in enumerate(inst.units):
        for t in range(T):
            lo, hi = (u.p_min, u.p_max) if S[i][t] else (0, 0)
            if not lo <= P[i][t] <= hi:
                return Evaluation(None, Violation("capacity", i, t, f"P={P[i][t]} outside [{lo}, {hi}]"))

    for t in range(T):
        total = sum((P[i][t] for i in range(N)), Fraction(0))
        if total != inst.load[t]:
            return Evaluation(None, Violation("load balance", None, t, f"sum P={total} != {inst.load[t]}"))

    counters = [duration_counters(u, S[i]) for i, u in enumerate(inst.units)]
    for i, u in enumerate(inst.units):
        x_on, x_off = counters[i]
        prev = u.init_on
        for t in range(T):
            if prev and not S[i][t] and x_on[t] < u.h_on:
                return Evaluation(None, Violation("minimum up time", i, t,
                                                  f"shut down after {x_on[t]} < {u.h_on} periods"))
            if not prev and S[i][t] and x_off[t] < u.h_off:
                return Evaluation(None, Violation("minimum down time", i, t,
                                                  f"started after {x_off[t]} < {u.h_off} periods"))
            prev = S[i][t]

    for t in range(T):
        spin = sum((u.p_max for i, u in enumerate(inst.units) if S[i][t]), Fraction(0))
        if spin < inst.reserve_requirement(t):
            return Evaluation(None, Violation("spinning reserve", None, t,
                                              f"{spin} < {inst.reserve_requirement(t)}"))

    if inst.ramps is not None:
        for i, r in enumerate(inst.ramps):
            for t in range(1, T):
                was, on = S[i][t - 1], S[i][t]
                y = int(on and not was)
                z = int(was and not on)
                up = int(was) * r.r_up + y * r.p_up
                down = int(on) * r.r_down + z * r.p_down
                if P[i][t] - P[i][t - 1] > up:
                    return Evaluation(None, Violation("ramp up", i, t, f"{P[i][t - 1]} -> {P[i][t]}"))
                if P[i][t - 1] - P[i][t] > down:
                    return Evaluation(None, Violation("ramp down", i, t, f"{P[i][t - 1]} -> {P[i][t]}"))

    cost = Fraction(0)
    kinds = []
    for i, u in enumerate(inst.units):
        c = price[i]
        _, x_off = counters[i]
        prev = u.init_on
        row = []
        for t in range(T):
            kind = None
            if S[i][t]:
                cost += c.a + c.b * P[i][t] + c.c * P[i][t] ** 2
                if not prev:
                    kind = "cold" if x_off[t] >= u.cold_window else "hot"
                    cost += c.c_cold if kind == "cold" else c.c_hot
            row.append(kind)
            prev = S[i][t]
        kinds.append(tuple(row))
    return Evaluation(cost, None, tuple(kinds))


def validate_solution(inst: UcInstance, sched: Schedule) -> bool:
    try:
        ev = evaluate_exact(inst, sched.status, sched.power)
    except ValueError:
        return False
    return ev.feasible and ev.cost == sched.obj_exact
