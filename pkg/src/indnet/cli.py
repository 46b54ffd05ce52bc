"""Command-line entry point: ``indnet <command> ...``.

Exit codes: 0 success, 1 invalid input or no solution, 2 usage error,
3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .bb import Limits, SolveStats
from .benders import PartialConfig, solve_benders
from .formulation import build_ind
from .generator import SIZES, generate_synthetic
from .instance import RAPID, InstanceError, TransitInstance, filter_by_demand, instance_from_dict, load_instance, save_instance
from .lp import solve_lp
from .methods import solve_direct, solve_sequential
from .mps import MpsError, read_mps, write_mps
from .oracle import OracleCapExceeded, solve_exact
from .render import RenderError, render_design
from .report import RunRecord, format_csv, format_table, load_record, save_record
from .solution import DesignSolution

log = logging.getLogger("indnet")

EXIT_OK, EXIT_NO_SOLUTION, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


def packaged_instances() -> list[str]:
    data = resources.files("indnet").joinpath("data")
    return sorted(p.name[:-5] for p in data.iterdir() if p.name.endswith(".json"))


def resolve_instance(arg: str) -> TransitInstance:
    """Load a file, or a packaged instance by bare name (e.g. ``seq_gap_demo``)."""
    path = Path(arg)
    if path.exists():
        return load_instance(path)
    if arg in packaged_instances():
        text = resources.files("indnet").joinpath(f"data/{arg}.json").read_text()
        return instance_from_dict(json.loads(text), name=arg)
    raise InstanceError(f"{arg}: no such file or packaged instance")


def _limits(args) -> Limits:
    return Limits(time=args.time_limit, nodes=args.node_limit)


def _write_solution(path, inst_arg: str, method: str, sol: DesignSolution | None):
    doc = {"instance": inst_arg, "method": method, "solution": sol.to_dict() if sol else None}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _summary(rec: RunRecord) -> str:
    r = rec.row()
    return (f"instance={rec.instance} method={rec.method} status={rec.stats.status} "
            f"obj_v={r['obj_v']} t={r['t']} gap={r['gap']} n_cuts={r['n_cuts']}")


def _record_name(rec: RunRecord) -> str:
    stem = f"{rec.instance}-{rec.method}"
    if rec.method == "benders":
        stem += f"-p{rec.percentage:g}-t{rec.selection_type}"
    return stem + ".record.json"


def run_solve(inst_arg: str, opts: dict) -> tuple[dict, dict | None]:
    """Solve one instance; returns the record document and the solution document."""
    inst = resolve_instance(inst_arg)
    limits = Limits(time=opts["time_limit"], nodes=opts["node_limit"])
    extra = {}
    if opts["method"] == "direct":
        res = solve_direct(inst, limits)
        sol, stats = res.solution, res.stats
        rec = RunRecord(inst.name, "direct", stats, sol.stats if sol else None,
                        time_limit=opts["time_limit"], node_limit=opts["node_limit"])
    else:
        cfg = PartialConfig(opts["percentage"], opts["type"], opts["seed"])
        res = solve_benders(inst, cfg, lam=opts["lam"], limits=limits, log_cuts=opts["cut_log"] is not None)
        sol, stats = res.solution, res.stats
        extra["retained_pairs"] = list(res.partial.retained)
        if opts["cut_log"] is not None:
            with open(opts["cut_log"], "a") as fh:
                for entry in res.cut_log:
                    fh.write(json.dumps({"instance": inst.name, **entry}) + "\n")
        rec = RunRecord(inst.name, "benders", stats, sol.stats if sol else None,
                        percentage=cfg.percentage, selection_type=cfg.selection_type,
                        seed=cfg.seed, lam=opts["lam"], time_limit=opts["time_limit"],
                        node_limit=opts["node_limit"], extra=extra)
    sol_doc = {"instance": inst_arg, "method": rec.method, "solution": sol.to_dict() if sol else None}
    return rec.to_dict(), sol_doc


def cmd_solve(args) -> int:
    if args.output and len(args.instances) > 1:
        raise _Usage("-o/--output needs a single instance")
    opts = {"method": args.method, "percentage": args.percentage, "type": args.type,
            "seed": args.seed, "lam": args.lam, "time_limit": args.time_limit,
            "node_limit": args.node_limit, "cut_log": args.cut_log}
    if args.jobs > 1 and len(args.instances) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(run_solve, args.instances, [opts] * len(args.instances)))
    else:
        outcomes = [run_solve(a, opts) for a in args.instances]
    code = EXIT_OK
    rec_dir = Path(args.record_dir)
    rec_dir.mkdir(parents=True, exist_ok=True)
    for rec_doc, sol_doc in outcomes:
        rec = RunRecord.from_dict(rec_doc)
        save_record(rec, rec_dir / _record_name(rec))
        print(_summary(rec))
        if rec.stats.obj_v is None:
            code = EXIT_NO_SOLUTION
        if args.output:
            Path(args.output).write_text(json.dumps(sol_doc, indent=1, sort_keys=True) + "\n")
    return code


def cmd_sequential(args) -> int:
    inst = resolve_instance(args.instance)
    res = solve_sequential(inst, _limits(args))
    rec = RunRecord(inst.name, "sequential", res.stats, res.solution.stats if res.solution else None,
                    time_limit=args.time_limit, node_limit=args.node_limit,
                    extra={"stage1_objective": res.stage1_objective})
    rec_dir = Path(args.record_dir)
    rec_dir.mkdir(parents=True, exist_ok=True)
    save_record(rec, rec_dir / _record_name(rec))
    print(f"stage1_obj={res.stage1_objective if res.stage1_objective is not None else '-'} " + _summary(rec))
    if args.output:
        _write_solution(args.output, args.instance, "sequential", res.solution)
    return EXIT_OK if res.solution is not None else EXIT_NO_SOLUTION


def cmd_oracle(args) -> int:
    import time

    inst = resolve_instance(args.instance)
    start = time.perf_counter()
    res = solve_exact(inst, cap=args.cap)
    stats = SolveStats(t=time.perf_counter() - start, nodes=res.designs_evaluated, obj_v=res.objective,
                       bound=res.objective, gap=0.0, status="optimal" if res.solution else "infeasible")
    if res.solution is None:
        stats.obj_v = None
    rec = RunRecord(inst.name, "oracle", stats, res.solution.stats if res.solution else None)
    print(f"objective={res.objective:g} designs={res.designs_evaluated}")
    if args.output:
        _write_solution(args.output, args.instance, "oracle", res.solution)
    if args.record_dir:
        Path(args.record_dir).mkdir(parents=True, exist_ok=True)
        save_record(rec, Path(args.record_dir) / _record_name(rec))
    return EXIT_OK if res.solution is not None else EXIT_NO_SOLUTION


def cmd_validate(args) -> int:
    inst = resolve_instance(args.file)
    print(json.dumps(inst.summary(), sort_keys=True))
    return EXIT_OK


def cmd_gen(args) -> int:
    inst = generate_synthetic(args.seed, args.size)
    save_instance(inst, args.output)
    print(f"wrote {args.output}: {len(inst.nodes)} nodes, {len(inst.edges)} edges, "
          f"{len(inst.demands)} pairs")
    return EXIT_OK


def cmd_filter(args) -> int:
    inst = resolve_instance(args.instance)
    out = filter_by_demand(inst, args.min_demand)
    if args.output:
        save_instance(out, args.output)
    print(f"pairs={len(out.demands)} demand={out.total_demand:g}")
    return EXIT_OK


def cmd_report(args) -> int:
    records = [load_record(p) for p in args.records]
    text = format_csv(records) if args.format == "csv" else format_table(records)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args) -> int:
    doc = json.loads(Path(args.solution).read_text())
    inst_arg = args.instance or doc.get("instance")
    if inst_arg is None:
        raise _Usage("the solution file names no instance; pass --instance")
    inst = resolve_instance(inst_arg)
    sol = DesignSolution.from_dict(doc["solution"]) if doc.get("solution") else None
    Path(args.output).write_text(render_design(inst, sol, title=inst.name))
    return EXIT_OK


def cmd_export(args) -> int:
    inst = resolve_instance(args.instance)
    model = build_ind(inst, modes=(RAPID,)) if args.rapid_only else build_ind(inst)
    write_mps(model, args.output)
    print(f"wrote {args.output}: {model.n} columns, {model.m} rows")
    return EXIT_OK


def cmd_lp(args) -> int:
    mps = read_mps(args.file)
    out = solve_lp(mps.problem)
    print(f"status={out.status} objective={out.objective if out.objective is not None else '-'} "
          f"iterations={out.iterations}")
    return EXIT_OK if out.status == "optimal" else EXIT_NO_SOLUTION


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Usage(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="indnet", description="Integrated rapid/slow transit line design.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v progress, -vv debug")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def limits(sp):
        sp.add_argument("--time-limit", type=float, default=None, metavar="S")
        sp.add_argument("--node-limit", type=int, default=None, metavar="N")
        sp.add_argument("--record-dir", default="runs", help="where run records go (default: runs)")

    s = sub.add_parser("validate", help="check an instance file")
    s.add_argument("file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("gen", help="generate a synthetic instance")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--size", choices=SIZES, default="tiny")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("filter", help="keep pairs with demand at least a threshold")
    s.add_argument("instance")
    s.add_argument("--min-demand", type=float, required=True, metavar="G")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("solve", help="solve with branch-and-bound or branch-and-Benders-cut")
    s.add_argument("instances", nargs="+")
    s.add_argument("--method", choices=("direct", "benders"), default="direct")
    s.add_argument("--percentage", type=float, default=0.0, metavar="P")
    s.add_argument("--type", type=int, choices=(1, 2, 3), default=1)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5, metavar="L")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cut-log", metavar="FILE", help="append one JSON line per Benders cut")
    s.add_argument("--jobs", type=int, default=1, metavar="N")
    s.add_argument("-o", "--output", help="solution file (single instance)")
    limits(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sequential", help="two-stage baseline: rapid line first, then slow refit")
    s.add_argument("instance")
    s.add_argument("-o", "--output")
    limits(s)
    s.set_defaults(func=cmd_sequential)

    s = sub.add_parser("oracle", help="exhaustive reference solve (tiny instances)")
    s.add_argument("instance")
    s.add_argument("--cap", type=int, default=1_000_000)
    s.add_argument("-o", "--output")
    s.add_argument("--record-dir", default=None)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("report", help="summarise run records")
    s.add_argument("records", nargs="+")
    s.add_argument("--format", choices=("table", "csv"), default="table")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("plot", help="draw a solution as SVG")
    s.add_argument("solution")
    s.add_argument("--instance")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("export", help="write the model in free MPS format")
    s.add_argument("instance")
    s.add_argument("--rapid-only", action="store_true")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("lp", help="solve the LP relaxation of an MPS file")
    s.add_argument("file")
    s.set_defaults(func=cmd_lp)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        print(f"indnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"indnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceError, MpsError, RenderError, OracleCapExceeded, FileNotFoundError, ValueError) as exc:
        print(f"indnet: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
