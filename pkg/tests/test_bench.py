import csv
from fractions import Fraction

import pytest

from ucsat.bench import (
    CSV_COLUMNS,
    GeneratorConfig,
    RunRecord,
    format_summary,
    generate_instance,
    load_instances,
    run_suite,
    summarize,
    write_csv,
)
from ucsat.model import format_instance, parse_instance, validate_solution
from ucsat.optimizer import solve_optimal
from ucsat.reduction import ReduceOptions, reduce


def test_generation_is_deterministic():
    a = format_instance(generate_instance(GeneratorConfig(5, 8, seed=3, ramp=True)))
    b = format_instance(generate_instance(GeneratorConfig(5, 8, seed=3, ramp=True)))
    assert a == b
    assert a != format_instance(generate_instance(GeneratorConfig(5, 8, seed=4, ramp=True)))


def test_naming_and_shape():
    inst = generate_instance(GeneratorConfig(2, 8))
    assert inst.name == "unit_2_8"
    text = format_instance(inst)
    assert text.count("\nUNIT ") == 2
    load_line = next(line for line in text.splitlines() if line.startswith("LOAD"))
    assert len(load_line.split()) == 9
    assert generate_instance(GeneratorConfig(2, 8, ramp=True)).name == "unit_2_8_ramp"


def test_generated_instances_are_reserve_feasible():
    for seed in range(20):
        inst = generate_instance(GeneratorConfig(4, 12, seed=seed))
        cap = sum(u.p_max for u in inst.units)
        assert all(cap >= inst.reserve_requirement(t) for t in range(inst.horizon))
        assert all(u.init_duration == u.h_off + u.t_cold and not u.init_on for u in inst.units)


def test_ramp_margins_within_interval():
    cfg_share = GeneratorConfig(1, 1).ramp_share
    margins = []
    for seed in range(100):
        inst = generate_instance(GeneratorConfig(3, 4, seed=seed, ramp=True))
        for u, r in zip(inst.units, inst.ramps):
            assert r.r_up == r.r_down
            margin = r.r_up / (u.p_max * Fraction(cfg_share))
            margins.append(margin)
            # the rate is snapped to the integer grid, so allow half a step of slack
            slack = Fraction(1, 2) / (u.p_max * Fraction(cfg_share))
            assert Fraction(9, 10) - slack <= margin <= Fraction(11, 10) + slack
    assert min(margins) < 1 < max(margins)


def test_bad_margin_rejected():
    with pytest.raises(ValueError):
        GeneratorConfig(2, 2, margin=(1.2, 1.0))


def test_instances_round_trip_through_files(tmp_path):
    for n in (2, 3):
        inst = generate_instance(GeneratorConfig.tiny(n, 3, seed=n))
        (tmp_path / f"{inst.name}.uc").write_text(format_instance(inst))
    (tmp_path / "notes.md").write_text("ignored")
    loaded = load_instances(tmp_path)
    assert [i.name for i in loaded] == ["unit_2_3", "unit_3_3"]
    assert loaded[0] == parse_instance(format_instance(generate_instance(GeneratorConfig.tiny(2, 3, seed=2))),
                                       name="unit_2_3")


def test_repeat_runs_give_avg_equal_best(tmp_path):
    inst = generate_instance(GeneratorConfig.tiny(2, 3, seed=1))
    records = run_suite([inst], runs_per_instance=3)
    assert len(records) == 3
    assert {r.seed for r in records} == {0, 1, 2}
    summary = summarize(records)
    entry = summary["table"][inst.name]["default"]
    assert entry["avg"] == entry["best"]
    for r in records:
        omegas = r.omega_log
        assert all(a > b for a, b in zip(omegas, omegas[1:]))
    path = tmp_path / "out.csv"
    write_csv(records, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3


def test_comparators_reach_same_objectives():
    insts = [generate_instance(GeneratorConfig.tiny(2, 3, seed=s, ramp=s % 2 == 1)) for s in range(4)]
    configs = {"binary": ReduceOptions(cmp="binary"), "tseitin": ReduceOptions(cmp="tseitin")}
    records = run_suite(insts, configs=configs)
    by = {(r.config, r.instance): r.obj_exact for r in records}
    for inst in insts:
        assert by[("binary", inst.name)] == by[("tseitin", inst.name)]


def _rec(config, instance, value):
    return RunRecord(instance, 0, 0, "ProvedOptimal", value, value, 1, 0.1, config)


def test_rank_of_dominating_config():
    records = [_rec("a", "x", 1.0), _rec("b", "x", 2.0), _rec("a", "y", 5.0), _rec("b", "y", 7.0)]
    summary = summarize(records)
    assert summary["avg_rank"]["a"] == {"avg": 1.0, "best": 1.0}
    assert summary["avg_rank"]["b"] == {"avg": 2.0, "best": 2.0}
    text = format_summary(summary)
    assert "avg rank" in text.splitlines()[-1]


def test_ties_share_rank():
    summary = summarize([_rec("a", "x", 3.0), _rec("b", "x", 3.0)])
    assert summary["avg_rank"]["a"]["best"] == summary["avg_rank"]["b"]["best"] == 1.5


def test_failures_are_recorded_not_raised():
    inst = generate_instance(GeneratorConfig.tiny(2, 2, seed=0))
    records = run_suite([inst], backend="exec:/nonexistent/solver")
    assert records[0].status == "Error" and records[0].error


def test_worker_pool_matches_serial():
    insts = [generate_instance(GeneratorConfig.tiny(2, 3, seed=s)) for s in range(3)]
    serial = run_suite(insts)
    pooled = run_suite(insts, workers=2)
    assert [(r.instance, r.obj_exact) for r in serial] == [(r.instance, r.obj_exact) for r in pooled]


def test_anytime_results_validate():
    inst = generate_instance(GeneratorConfig(3, 6, seed=2))
    res = solve_optimal(reduce(inst), budget=3.0)
    if res.best is not None:
        assert validate_solution(inst, res.best)
