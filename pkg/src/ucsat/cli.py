"""Command-line front end: ``solve``, ``encode``, ``gen``, ``bench``, ``oracle``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import GeneratorConfig, format_summary, generate_instance, load_instances, run_suite, \
    summarize, write_csv
from .circuits import GridError
from .cnf import CnfError
from .model import InstanceError, Schedule, evaluate_exact, format_instance, read_instance
from .optimizer import BackendError, ResultStatus, make_backend, solve_optimal
from .oracle import SearchSpaceTooLarge, oracle_solve
from .reduction import ReduceOptions, reduce

EXIT_OK = 0
EXIT_TIME_LIMIT = 2
EXIT_INFEASIBLE = 3
EXIT_USAGE = 64
EXIT_DATA = 65

_STATUS_EXIT = {
    ResultStatus.PROVED_OPTIMAL: EXIT_OK,
    ResultStatus.TIME_LIMIT: EXIT_TIME_LIMIT,
    ResultStatus.INFEASIBLE: EXIT_INFEASIBLE,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt_num(x) -> str:
    f = float(x)
    return f"{f:.6f}".rstrip("0").rstrip(".")


def format_schedule(sched: Schedule) -> str:
    lines = []
    for i, (srow, prow) in enumerate(zip(sched.status, sched.power), start=1):
        cells = [(_fmt_num(p) if s else "-") for s, p in zip(srow, prow)]
        lines.append(f"unit {i:>3}: " + " ".join(f"{c:>9}" for c in cells))
    return "\n".join(lines)


def _print_result(name: str, status: str, sched: Schedule | None, extra: dict, as_json: bool):
    if as_json:
        out = {"instance": name, "status": status, **extra}
        out.setdefault("best", None if sched is None else sched.to_dict())
        print(json.dumps(out, indent=2, sort_keys=True))
        return
    print(f"instance: {name}")
    print(f"status: {status}")
    if sched is None:
        print("no feasible schedule found")
        return
    print(format_schedule(sched))
    print(f"objective (discretized): {_fmt_num(sched.obj_discrete)}")
    if sched.obj_exact is not None:
        print(f"objective (exact): {_fmt_num(sched.obj_exact)}")
    for key, value in extra.items():
        if key in ("iterations", "calls", "wall_time"):
            print(f"{key}: {value if key != 'iterations' else len(value)}")


def _options(args) -> ReduceOptions:
    return ReduceOptions(capacity=args.capacity, cmp=args.cmp, frac_bits=args.frac_bits,
                         cost_frac_bits=args.cost_frac_bits)


def _add_encoding_flags(p):
    p.add_argument("--frac-bits", type=int, default=None, help="fractional bits for power (default: auto)")
    p.add_argument("--cost-frac-bits", type=int, default=7, help="fractional bits for cost coefficients")
    p.add_argument("--capacity", choices=("specialized", "generic"), default="specialized")
    p.add_argument("--cmp", choices=("binary", "tseitin"), default="binary")


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    ep = reduce(inst, _options(args))
    with make_backend(args.backend, seed=args.seed) as backend:
        res = solve_optimal(ep, backend, args.time_limit)
    extra = res.to_dict()
    extra.pop("status")
    extra["encoding"] = {"vars": ep.builder.num_vars, "clauses": ep.builder.num_clauses,
                         "frac_bits": ep.frac_bits, "cost_frac_bits": ep.options.cost_frac_bits}
    extra["rounding"] = [{"unit": i + 1, "coef": name, "exact": str(e), "rounded": str(r)}
                         for i, name, e, r in ep.rounding_report]
    _print_result(inst.name, res.status.value, res.best, extra, args.json)
    if res.status is ResultStatus.TIME_LIMIT and res.best is None:
        print("time limit reached before any feasible schedule was found", file=sys.stderr)
    return _STATUS_EXIT[res.status]


def cmd_oracle(args) -> int:
    inst = read_instance(args.instance)
    res = oracle_solve(inst, frac_bits=args.frac_bits, cost_frac_bits=args.cost_frac_bits)
    if not res.feasible:
        _print_result(inst.name, ResultStatus.INFEASIBLE.value, None, {}, args.json)
        return EXIT_INFEASIBLE
    sched = res.schedule
    exact = evaluate_exact(inst, sched.status, sched.power).cost
    sched = Schedule(sched.status, sched.power, sched.obj_discrete, exact)
    _print_result(inst.name, ResultStatus.PROVED_OPTIMAL.value, sched,
                  {"matrices_checked": res.matrices_checked}, args.json)
    return EXIT_OK


def cmd_encode(args) -> int:
    inst = read_instance(args.instance)
    ep = reduce(inst, _options(args))
    base = Path(args.out)
    with open(base.with_suffix(".cnf"), "w", newline="\n") as fh:
        ep.builder.export_dimacs(fh)
    with open(base.with_suffix(".map"), "w", newline="\n") as fh:
        fh.write(f"VARS {ep.builder.num_vars}\nCLAUSES {ep.builder.num_clauses}\n")
        ep.write_map(fh)
    print(f"wrote {base.with_suffix('.cnf')} ({ep.builder.num_vars} vars, "
          f"{ep.builder.num_clauses} clauses) and {base.with_suffix('.map')}")
    return EXIT_OK


def cmd_gen(args) -> int:
    maker = GeneratorConfig.tiny if args.tiny else GeneratorConfig
    cfg = maker(args.units, args.horizon, seed=args.seed, ramp=args.ramp)
    inst = generate_instance(cfg)
    text = format_instance(inst)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_bench(args) -> int:
    instances = load_instances(args.dir)
    if not instances:
        raise InstanceError(f"no instance files in {args.dir}")
    configs = {"binary": _options(args)}
    if args.compare_cmp:
        configs["tseitin"] = ReduceOptions(args.capacity, "tseitin", args.frac_bits, args.cost_frac_bits)
    records = run_suite(instances, args.runs, args.budget, configs, args.backend,
                        base_seed=args.seed, workers=args.workers)
    write_csv(records, args.out)
    print(format_summary(summarize(records)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ucsat", description="Unit commitment via SAT reduction")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="find an optimal schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--backend", default="internal", help="internal | pysat:<name> | exec:<path>")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--json", action="store_true")
    _add_encoding_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("encode", help="write DIMACS and a variable map")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True, help="output base path (writes .cnf and .map)")
    _add_encoding_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--units", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ramp", action="store_true")
    p.add_argument("--tiny", action="store_true", help="desk-scale parameter ranges")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="run every instance in a directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--budget", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", default="internal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--compare-cmp", action="store_true", help="also run the Tseitin comparator")
    _add_encoding_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="brute-force optimum of a tiny instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--frac-bits", type=int, default=0)
    p.add_argument("--cost-frac-bits", type=int, default=7)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"ucsat: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceError, GridError, OSError, SearchSpaceTooLarge, CnfError) as exc:
        print(f"ucsat: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(f"ucsat: backend failure: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
