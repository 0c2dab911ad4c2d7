"""Synthetic instance generation and the batch harness.

Generated instances are named ``unit_<N>_<T>`` (``unit_<N>_<T>_ramp`` for the
ramping variant). Ramp rates are a fixed share of unit capacity scaled by a
margin drawn uniformly from ``margin`` and snapped to the power grid.
"""

from __future__ import annotations

import csv
import logging
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from scipy.stats import rankdata

from .circuits import round_to_grid
from .model import RampParams, UcInstance, UnitParams, read_instance
from .optimizer import make_backend, solve_optimal
from .reduction import ReduceOptions, reduce

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("instance", "run", "seed", "status", "obj_discrete", "obj_exact", "iterations", "time_s")


@dataclass(frozen=True)
class GeneratorConfig:
    n_units: int
    horizon: int
    seed: int = 0
    ramp: bool = False
    p_max: tuple[int, int] = (20, 455)
    p_min_share: tuple[float, float] = (0.15, 0.5)
    a: tuple[float, float] = (400.0, 1000.0)
    b: tuple[float, float] = (16.0, 27.0)
    c: tuple[float, float] = (0.0002, 0.007)
    c_hot: tuple[float, float] = (30.0, 560.0)
    cold_ratio: float = 2.0
    t_cold: tuple[int, int] = (0, 5)
    h: tuple[int, int] = (1, 8)
    load_share: tuple[float, float] = (0.4, 0.9)
    reserve_factor: Fraction = Fraction(11, 10)
    ramp_share: float = 0.5
    margin: tuple[float, float] = (0.9, 1.1)
    cost_decimals: int = 2
    frac_bits: int = 0

    def __post_init__(self):
        if self.n_units < 1 or self.horizon < 1:
            raise ValueError("n_units and horizon must be positive")
        lo, hi = self.margin
        if not 0 < lo <= hi:
            raise ValueError("margin interval must be positive and ordered")

    @property
    def name(self) -> str:
        base = f"unit_{self.n_units}_{self.horizon}"
        return base + "_ramp" if self.ramp else base

    @classmethod
    def tiny(cls, n_units: int, horizon: int, seed: int = 0, ramp: bool = False) -> "GeneratorConfig":
        """Desk-scale ranges: integer power up to 8 MW and short minimum times."""
        return cls(n_units, horizon, seed, ramp, p_max=(2, 8), a=(1.0, 10.0), b=(1.0, 5.0),
                   c=(0.0, 0.5), c_hot=(1.0, 10.0), t_cold=(0, 2), h=(1, 3),
                   reserve_factor=Fraction(1), load_share=(0.3, 0.9))


def _dec(rng: random.Random, lo: float, hi: float, digits: int) -> Fraction:
    return Fraction(round(rng.uniform(lo, hi) * 10**digits), 10**digits)


def generate_instance(cfg: GeneratorConfig) -> UcInstance:
    rng = random.Random(f"ucsat:{cfg.n_units}:{cfg.horizon}:{cfg.seed}")
    step = Fraction(1, 2**cfg.frac_bits)
    d = cfg.cost_decimals
    units = []
    for _ in range(cfg.n_units):
        p_max = Fraction(rng.randint(*cfg.p_max))
        p_min = round_to_grid(p_max * Fraction(rng.uniform(*cfg.p_min_share)), cfg.frac_bits)
        p_min = min(max(p_min, step), p_max)
        c_hot = _dec(rng, *cfg.c_hot, d)
        h_on, h_off = rng.randint(*cfg.h), rng.randint(*cfg.h)
        t_cold = rng.randint(*cfg.t_cold)
        units.append(UnitParams(
            p_min=p_min, p_max=p_max,
            a=_dec(rng, *cfg.a, d), b=_dec(rng, *cfg.b, d), c=_dec(rng, *cfg.c, max(d, 5)),
            c_hot=c_hot, c_cold=c_hot * Fraction(cfg.cold_ratio).limit_denominator(100),
            t_cold=t_cold, h_on=h_on, h_off=h_off,
            init_on=False, init_duration=h_off + t_cold,
        ))
    capacity = sum(u.p_max for u in units)
    ceiling = capacity / cfg.reserve_factor
    floor = min(u.p_min for u in units)
    load = []
    for _ in range(cfg.horizon):
        r = round_to_grid(ceiling * Fraction(rng.uniform(*cfg.load_share)), cfg.frac_bits, "floor")
        load.append(min(max(r, floor), round_to_grid(ceiling, cfg.frac_bits, "floor")))
    ramps = None
    if cfg.ramp:
        ramps = []
        for u in units:
            margin = Fraction(rng.uniform(*cfg.margin))
            rate = round_to_grid(u.p_max * Fraction(cfg.ramp_share) * margin, cfg.frac_bits)
            ramps.append(RampParams.for_unit(u, rate, rate))
    return UcInstance(units, load, cfg.reserve_factor, ramps, name=cfg.name)


# ---------------------------------------------------------------------------
# harness


@dataclass
class RunRecord:
    instance: str
    run: int
    seed: int
    status: str
    obj_discrete: float | None
    obj_exact: float | None
    iterations: int
    time_s: float
    config: str = "default"
    omega_log: list = field(default_factory=list)
    error: str = ""

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}


def _run_one(args) -> RunRecord:
    inst, run, seed, budget, options, backend_spec, config = args
    start = time.perf_counter()
    try:
        ep = reduce(inst, options)
        with make_backend(backend_spec, seed=seed) as backend:
            res = solve_optimal(ep, backend, budget)
        best = res.best
        return RunRecord(
            inst.name, run, seed, res.status.value,
            None if best is None else float(best.obj_discrete),
            None if best is None else float(best.obj_exact),
            len(res.iterations), time.perf_counter() - start, config,
            [float(o) for o, _ in res.iterations],
        )
    except Exception as exc:  # recorded, not fatal
        logger.exception("run %s/%d failed", inst.name, run)
        return RunRecord(inst.name, run, seed, "Error", None, None, 0,
                         time.perf_counter() - start, config, error=repr(exc))


def run_suite(instances: Sequence[UcInstance], runs_per_instance: int = 1, budget: float | None = None,
              configs: dict[str, ReduceOptions] | None = None, backend: str = "internal",
              base_seed: int = 0, workers: int = 1) -> list[RunRecord]:
    configs = configs or {"default": ReduceOptions()}
    jobs = []
    for name, options in configs.items():
        for inst in instances:
            for run in range(runs_per_instance):
                jobs.append((inst, run, base_seed + run, budget, options, backend, name))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(job) for job in jobs]
    records.sort(key=lambda r: (r.config, r.instance, r.run))
    return records


def write_csv(records: Iterable[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.row())


def summarize(records: Sequence[RunRecord]) -> dict:
    """AVG/BEST of the exact objective per (instance, config) and average ranks.

    Ranks are computed per instance over configurations with fractional
    ranking for ties (lower objective ranks first); instances where a
    configuration found nothing are left out of that metric's ranking.
    """
    configs = sorted({r.config for r in records})
    names = sorted({r.instance for r in records})
    table: dict[str, dict[str, dict]] = {}
    for name in names:
        table[name] = {}
        for cfg in configs:
            vals = [r.obj_exact for r in records
                    if r.instance == name and r.config == cfg and r.obj_exact is not None]
            table[name][cfg] = {
                "avg": statistics.fmean(vals) if vals else None,
                "best": min(vals) if vals else None,
                "runs": sum(1 for r in records if r.instance == name and r.config == cfg),
            }
    ranks = {cfg: {"avg": [], "best": []} for cfg in configs}
    for name in names:
        for metric in ("avg", "best"):
            vals = [table[name][cfg][metric] for cfg in configs]
            if any(v is None for v in vals):
                continue
            for cfg, rk in zip(configs, rankdata(vals, method="average")):
                ranks[cfg][metric].append(float(rk))
    avg_rank = {cfg: {m: (statistics.fmean(v) if v else None) for m, v in ranks[cfg].items()}
                for cfg in configs}
    return {"configs": configs, "instances": names, "table": table, "avg_rank": avg_rank}


def format_summary(summary: dict) -> str:
    configs = summary["configs"]
    head = ["instance"] + [f"{c}:{m}" for c in configs for m in ("AVG", "BEST")]
    lines = ["  ".join(f"{h:>18}" for h in head)]

    def cell(v):
        return f"{v:18.2f}" if v is not None else f"{'-':>18}"

    for name in summary["instances"]:
        row = [f"{name:>18}"]
        for cfg in configs:
            entry = summary["table"][name][cfg]
            row += [cell(entry["avg"]), cell(entry["best"])]
        lines.append("  ".join(row))
    row = [f"{'avg rank':>18}"]
    for cfg in configs:
        rk = summary["avg_rank"][cfg]
        row += [cell(rk["avg"]), cell(rk["best"])]
    lines.append("  ".join(row))
    return "\n".join(lines)


def load_instances(directory) -> list[UcInstance]:
    """Every ``*.uc`` or ``*.txt`` instance file in ``directory``, sorted by name."""
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.suffix in (".uc", ".txt"))
    return [read_instance(p) for p in files]
