import json
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TINY_SEEDS, make_instance, tiny, two_station_instance
from indnet.instance import Edge, derive_arcs
from indnet.oracle import (EnumeratedDesign, LineDesign, OracleCapExceeded, best_routing,
                           enumerate_designs, evaluate_design, rapid_designs, solve_exact,
                           solve_sequential_exact)
from indnet.solution import build_solution, check_feasibility

GOLDEN = Path(__file__).parent / "golden"


def three_node_line(**params):
    base = dict(max_rapid_edges=2, max_slow_edges=1, min_unchanged_slow_edges=1)
    base.update(params)
    return make_instance(
        [(0, 0, "Ro"), (1000, 0, "R"), (2000, 0, "Rd"), (0, 800, "SO"), (2000, 800, "SD")],
        [(0, 1, "R"), (1, 2, "R"), (3, 4, "S*")],
        [(0, 100), (2000, 100)], [(0, 1, 5)], **base)


def test_single_edge_has_one_design():
    designs = list(rapid_designs(two_station_instance()))
    assert len(designs) == 1
    assert designs[0].stops == (0, 1) and designs[0].nonstops == ()


def test_three_node_path_has_two_labelings():
    designs = list(rapid_designs(three_node_line()))
    assert sorted((d.stops, d.nonstops) for d in designs) == [((0, 1, 2), ()), ((0, 2), (1,))]


def test_spacing_wider_than_network_gives_no_designs():
    inst = three_node_line(min_station_spacing=5000.0)
    assert list(enumerate_designs(inst)) == []
    res = solve_exact(inst)
    assert res.objective == 0 and res.solution is None


def test_zero_pairs():
    inst = replace(tiny(1), demands=())
    assert solve_exact(inst).objective == 0


def test_cap():
    with pytest.raises(OracleCapExceeded):
        list(enumerate_designs(tiny(1), cap=1))


def test_golden_seed_one():
    golden = json.loads((GOLDEN / "oracle_tiny_1.json").read_text())
    res = solve_exact(tiny(1))
    sol = res.solution
    assert res.objective == golden["objective"]
    assert res.designs_evaluated == golden["designs_evaluated"]
    assert list(sol.rapid_edges) == golden["rapid_edges"]
    assert list(sol.rapid_stops) == golden["rapid_stops"]
    assert list(sol.slow_edges) == golden["slow_edges"]
    assert [r.pair for r in sol.routes if r.covered] == golden["covered_pairs"]


def test_no_walk_link_means_no_route():
    inst = two_station_instance()
    far = replace(inst, walk_links=tuple(w for w in inst.walk_links if w.centroid != 0))
    (design,) = enumerate_designs(far)
    assert best_routing(far, design, 0) is None


def test_two_stop_route_time_by_hand():
    inst = two_station_instance()
    (design,) = enumerate_designs(inst)
    legs, t = best_routing(inst, design, 0)
    p = inst.params
    walk = 100 / (5000 / 60)
    ride = 1000 / (70000 / 60)
    assert t == pytest.approx(walk + (p.wait_time - 0.5 * p.stop_time_rapid) + p.stop_time_rapid
                              + ride + walk)
    assert [leg.kind for leg in legs] == ["walk_in", "ride", "walk_out"]


def test_route_beyond_utility_is_absent():
    inst = two_station_instance(private_utility_factor=2.0)
    (design,) = enumerate_designs(inst)
    assert best_routing(inst, design, 0) is None


def test_at_most_one_transfer_each_way():
    # slow 4-0, rapid 0-1, slow 1-2, rapid 2-3 would need a second SR transfer
    inst = make_instance(
        [(0, 0, "RSo"), (1500, 0, "RS"), (3000, 0, "RS"), (4500, 0, "Rd"), (-1500, 0, "SO"),
         (3000, 1500, "SD")],
        [(0, 1, "R"), (1, 2, "RS"), (2, 3, "R"), (4, 0, "S*"), (2, 5, "S")],
        [(-1500, 100), (4500, 100)], [(0, 1, 5)],
        max_rapid_edges=3, max_slow_edges=3, min_unchanged_slow_edges=1,
        private_utility_factor=20.0, min_station_spacing=100.0)
    for design in enumerate_designs(inst):
        r = best_routing(inst, design, 0)
        if r:
            assert sum(1 for leg in r[0] if leg.kind == "transfer" and leg.mode == "SR") <= 1


def reversed_edges(inst):
    """Same network with edge ids reversed and endpoints flipped."""
    n = len(inst.edges)
    edges = tuple(Edge(n - 1 - e.id, e.endpoints[::-1], e.in_rapid, e.in_slow, e.length,
                       e.on_old_slow_line) for e in reversed(inst.edges))
    return replace(inst, edges=edges, arcs=derive_arcs(inst.params, inst.nodes, edges))


@pytest.mark.parametrize("seed", [1, 3, 7, 14])
def test_routing_invariant_under_reversed_arc_order(seed):
    inst = tiny(seed)
    rev = reversed_edges(inst)
    n = len(inst.edges)

    def flip(line):
        if line is None:
            return None
        return LineDesign(line.mode, line.nodes, tuple(n - 1 - e for e in line.edges), line.stops,
                          line.nonstops)

    for design in enumerate_designs(inst):
        other = EnumeratedDesign(flip(design.rapid), flip(design.slow))
        for d in inst.demands:
            a, b = best_routing(inst, design, d), best_routing(rev, other, d)
            assert (a is None) == (b is None)
            if a:
                assert a[1] == pytest.approx(b[1], abs=1e-9)
    assert solve_exact(rev).objective == solve_exact(inst).objective


@pytest.mark.parametrize("seed", TINY_SEEDS[:10])
def test_sequential_not_better_than_joint(seed):
    inst = tiny(seed)
    seq = solve_sequential_exact(inst)
    assert seq.worst_objective <= seq.objective <= solve_exact(inst).objective


def test_oracle_solution_passes_feasibility():
    for seed in TINY_SEEDS:
        inst = tiny(seed)
        res = solve_exact(inst)
        assert check_feasibility(inst, res.solution).ok, seed


@settings(max_examples=40)
@given(st.sampled_from(TINY_SEEDS), st.integers(0, 10_000))
def test_oracle_bounds_every_feasible_design(seed, pick):
    inst = tiny(seed)
    designs = list(enumerate_designs(inst))
    design = designs[pick % len(designs)]
    value, routes = evaluate_design(inst, design)
    sol = build_solution(inst, design.rapid.edges, design.rapid.stops, design.rapid.nonstops,
                         design.slow.edges, design.slow.stops, routes)
    assert check_feasibility(inst, sol).ok
    assert sol.objective == value <= solve_exact(inst).objective
