"""End-to-end acceptance checks; each prints one PASS/FAIL line.

The expensive runs (direct, oracle and the Benders grid over all tiny seeds)
are computed once per module and shared between criteria.
"""
import json
import time

import numpy as np
import pytest

from conftest import TINY_SEEDS, tiny
from indnet import cli
from indnet.benders import PartialConfig, build_partial_master, build_subproblem, solve_benders
from indnet.generator import DEMAND_LADDER
from indnet.instance import save_instance
from indnet.lp import dual_objective, farkas_gap, solve_lp
from indnet.methods import solve_sequential
from indnet.oracle import enumerate_designs, evaluate_design, solve_exact
from indnet.report import format_csv
from indnet.solution import DesignSolution, build_solution, check_feasibility, model_values
from test_lp import random_lp

GRID = [(pct, kind) for pct in (0, 10, 50) for kind in (1, 2, 3)]


@pytest.fixture(scope="module")
def instance_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    files = {}
    for seed in TINY_SEEDS:
        files[seed] = root / f"tiny-{seed}.json"
        save_instance(tiny(seed), files[seed])
    return files


@pytest.fixture(scope="module")
def direct_runs(instance_files):
    """``solve --method direct`` and the oracle on every seed, with wall time."""
    opts = {"method": "direct", "percentage": 0.0, "type": 1, "seed": 0, "lam": 0.5,
            "time_limit": None, "node_limit": None, "cut_log": None}
    start = time.perf_counter()
    out = {}
    for seed, path in instance_files.items():
        rec, sol = cli.run_solve(str(path), opts)
        oracle = solve_exact(tiny(seed))
        out[seed] = (rec, DesignSolution.from_dict(sol["solution"]), oracle)
    return out, time.perf_counter() - start


def oracle_points(inst, partial):
    pts = []
    for design in enumerate_designs(inst):
        _, routes = evaluate_design(inst, design)
        sol = build_solution(inst, design.rapid.edges, design.rapid.stops, design.rapid.nonstops,
                             design.slow.edges, design.slow.stops, routes)
        pts.append(partial.restrict(model_values(inst, partial.full, sol)))
    # every pair uncovered on the first design as well
    design = next(iter(enumerate_designs(inst)))
    bare = build_solution(inst, design.rapid.edges, design.rapid.stops, design.rapid.nonstops,
                          design.slow.edges, design.slow.stops, {})
    pts.append(partial.restrict(model_values(inst, partial.full, bare)))
    return np.array(pts)


@pytest.fixture(scope="module")
def benders_grid():
    """Benders runs over the configuration grid, with cut validity checked per run."""
    runs = {}
    for seed in TINY_SEEDS:
        inst = tiny(seed)
        for pct, kind in GRID:
            res = solve_benders(inst, PartialConfig(pct, kind), log_cuts=True)
            worst = -np.inf
            if res.cuts:
                pts = oracle_points(inst, res.partial)
                for cut in res.cuts:
                    act = pts[:, cut.cols] @ cut.coefs
                    worst = max(worst, float(np.max(act - cut.rhs)))
            runs[seed, pct, kind] = {"objective": res.objective, "n_cuts": res.stats.n_cuts,
                                     "logged": len(res.cut_log), "worst_violation": worst,
                                     "solution": res.solution}
    return runs


def test_criterion_1_oracle_equivalence(direct_runs, acceptance_line):
    runs, elapsed = direct_runs
    bad = [s for s, (rec, _, oracle) in runs.items() if rec["stats"]["obj_v"] != oracle.objective]
    ok = not bad and elapsed < 120
    acceptance_line(1, ok, f"direct == oracle on {len(runs) - len(bad)}/{len(runs)} seeds, "
                           f"{elapsed:.1f} s total (limit 120 s); mismatches {bad}")
    assert ok


def test_criterion_2_benders_correctness(direct_runs, benders_grid, acceptance_line):
    runs, _ = direct_runs
    wrong = [k for k, r in benders_grid.items() if r["objective"] != runs[k[0]][2].objective]
    with_cuts = sum(1 for s in TINY_SEEDS if benders_grid[s, 0, 1]["n_cuts"] >= 1)
    ok = not wrong and with_cuts >= 20
    acceptance_line(2, ok, f"{len(benders_grid) - len(wrong)}/{len(benders_grid)} grid runs match "
                           f"the oracle; cuts at 0% on {with_cuts}/25 instances (need 20)")
    assert ok


def test_criterion_3_cut_validity(benders_grid, acceptance_line):
    total = sum(r["n_cuts"] for r in benders_grid.values())
    logged = sum(r["logged"] for r in benders_grid.values())
    worst = max(r["worst_violation"] for r in benders_grid.values())
    ok = worst <= 1e-6 and logged == total
    acceptance_line(3, ok, f"{total} cuts checked against every oracle design; "
                           f"largest violation {worst:.2e}")
    assert ok


def test_criterion_4_projection_property(direct_runs, acceptance_line):
    runs, _ = direct_runs
    worst, checked = 0.0, 0
    failures = []
    for seed, (_, sol, oracle) in runs.items():
        inst = tiny(seed)
        partial = build_partial_master(inst, PartialConfig(0))
        for design in (sol, oracle.solution):
            point = partial.restrict(model_values(inst, partial.full, design))
            for w in partial.projected:
                out = solve_lp(build_subproblem(partial, w, point, objective="time"))
                checked += 1
                if out.status != "optimal":
                    failures.append((seed, w))
                    continue
                dev = float(np.max(np.abs(out.x - np.round(out.x)), initial=0.0))
                worst = max(worst, dev)
    ok = not failures and worst <= 1e-6
    acceptance_line(4, ok, f"{checked} subproblem LPs at optimal designs; max integrality "
                           f"deviation {worst:.1e}; non-optimal {failures}")
    assert ok


def test_criterion_5_sequential_suboptimality(direct_runs, acceptance_line):
    runs, _ = direct_runs
    worse = []
    for seed in TINY_SEEDS:
        seq = solve_sequential(tiny(seed)).objective
        if seq > runs[seed][2].objective:
            worse.append(seed)
    demo = cli.resolve_instance("seq_gap_demo")
    seq_demo = solve_sequential(demo).objective
    joint_demo = solve_exact(demo).objective
    ok = not worse and seq_demo < joint_demo
    acceptance_line(5, ok, f"sequential <= integrated on {25 - len(worse)}/25; "
                           f"seq_gap_demo {seq_demo:g} < {joint_demo:g}")
    assert ok


def test_criterion_6_structural_invariants(direct_runs, benders_grid, acceptance_line):
    runs, _ = direct_runs
    checked, bad = 0, []
    for seed, (_, sol, oracle) in runs.items():
        inst = tiny(seed)
        sols = [("direct", sol), ("oracle", oracle.solution),
                ("sequential", solve_sequential(inst).solution)]
        sols += [(f"benders{pct}/{kind}", benders_grid[seed, pct, kind]["solution"])
                 for pct, kind in GRID]
        for name, s in sols:
            checked += 1
            rep = check_feasibility(inst, s)
            if not rep.ok:
                bad.append((seed, name, rep.failures()))
    ok = not bad
    acceptance_line(6, ok, f"{checked - len(bad)}/{checked} returned solutions pass every family")
    assert ok, bad[:3]


def test_criterion_7_lp_kernel(acceptance_line):
    rng = np.random.default_rng(20240607)
    optimal = infeasible = 0
    bad = []
    for k in range(500):
        p = random_lp(rng, 30, 30, infeasible_bias=float(rng.choice([0.0, -6.0])))
        out = solve_lp(p)
        if out.status == "optimal":
            optimal += 1
            dual = dual_objective(p, out.duals, out.reduced_costs)
            if abs(dual - out.objective) > 1e-6 * (1 + abs(out.objective)):
                bad.append((k, "duality"))
        elif out.status == "infeasible":
            infeasible += 1
            if not farkas_gap(p, out.farkas) > 0:
                bad.append((k, "farkas"))
        else:
            bad.append((k, out.status))
    ok = not bad
    acceptance_line(7, ok, f"500 LPs: {optimal} optimal with matching duals, {infeasible} "
                           f"infeasible with verified rays; failures {bad[:5]}")
    assert ok


def test_criterion_8_reporting_fidelity(tmp_path, capsys, acceptance_line):
    path = tmp_path / "ladder.json"
    assert cli.main(["gen", "--seed", "2", "--size", "seville-like", "-o", str(path)]) == 0
    demands = [d["demand"] for d in json.loads(path.read_text())["demands"]]
    capsys.readouterr()
    mismatches = []
    for threshold in sorted(DEMAND_LADDER, reverse=True):
        assert cli.main(["filter", str(path), "--min-demand", str(threshold)]) == 0
        shown = int(capsys.readouterr().out.split()[0].split("=")[1])
        truth = sum(1 for g in demands if g >= threshold and g > 0)
        if shown != truth or truth != DEMAND_LADDER[threshold]:
            mismatches.append((threshold, shown, truth))
    header = format_csv([]).rstrip("\n")
    expected = ("instance,method,percentage,type,t,gap,n_cuts,obj_v,demand_R,demand_S,demand_RS,"
                "pairs_R,pairs_S,pairs_RS")
    ok = not mismatches and header == expected
    acceptance_line(8, ok, f"filter counts match the file on {6 - len(mismatches)}/6 thresholds; "
                           f"CSV header {'exact' if header == expected else 'differs'}")
    assert ok
