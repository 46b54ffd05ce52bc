import functools
import json
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from indnet.generator import DEMAND_LADDER, SEVILLE_PAIRS, generate_synthetic, ladder_file_instance
from indnet.instance import (Centroid, DemandPair, InstanceError, Edge, InstanceParams, Node,
                             build_instance, canonical_json, compute_private_utilities,
                             derive_walk_links, filter_by_demand, instance_from_dict,
                             instance_to_dict, load_instance, save_instance, with_explicit_data)

from conftest import tiny


def minimal_doc():
    return {
        "params": {"max_rapid_edges": 1, "max_slow_edges": 1, "min_unchanged_slow_edges": 1},
        "nodes": [
            {"id": 0, "position": [0, 0], "in_rapid": True, "in_slow": False, "rapid_origin": True},
            {"id": 1, "position": [1000, 0], "in_rapid": True, "in_slow": False, "rapid_dest": True},
            {"id": 2, "position": [0, 500], "in_rapid": False, "in_slow": True, "slow_origin": True},
            {"id": 3, "position": [1000, 500], "in_rapid": False, "in_slow": True, "slow_dest": True},
        ],
        "edges": [
            {"id": 0, "endpoints": [0, 1], "in_rapid": True, "in_slow": False, "length": 1000},
            {"id": 1, "endpoints": [2, 3], "in_rapid": False, "in_slow": True, "length": 1000,
             "on_old_slow_line": True},
        ],
        "centroids": [{"id": 0, "position": [0, 100]}, {"id": 1, "position": [1000, 100]}],
        "demands": [{"id": 0, "origin": 0, "dest": 1, "demand": 5}],
    }


def single_centroid_instance(centroid, rapid_positions, slow_positions, **params):
    """One centroid plus isolated rapid/slow stations, for walk-link checks."""
    nodes, edges = [], []
    for pos in rapid_positions:
        nodes.append(Node(len(nodes), pos, True, False, rapid_origin=True, rapid_dest=True))
    for pos in slow_positions:
        nodes.append(Node(len(nodes), pos, False, True, slow_origin=True, slow_dest=True))
    rapid = [n.id for n in nodes if n.in_rapid]
    slow = [n.id for n in nodes if n.in_slow]
    edges.append(Edge(0, (rapid[0], rapid[1]), True, False, 100.0))
    edges.append(Edge(1, (slow[0], slow[1]), False, True, 100.0, True))
    cents = [Centroid(0, centroid), Centroid(1, (9000.0, 9000.0))]
    p = InstanceParams(max_rapid_edges=1, max_slow_edges=1, min_unchanged_slow_edges=1, **params)
    return build_instance(p, nodes, edges, cents, [{"id": 0, "origin": 0, "dest": 1, "demand": 1}])


def test_minimal_instance_has_four_arcs(tmp_path):
    path = tmp_path / "min.json"
    path.write_text(json.dumps(minimal_doc()))
    inst = load_instance(path)
    assert len(inst.arcs) == 4
    assert inst.summary()["pairs"] == 1


def test_edge_endpoint_mode_breach_names_edge():
    doc = minimal_doc()
    doc["edges"][0]["in_slow"] = True
    with pytest.raises(InstanceError, match="edge 0"):
        instance_from_dict(doc)


def test_schema_violation_cites_path():
    doc = minimal_doc()
    doc["nodes"][1]["position"] = "far away"
    with pytest.raises(InstanceError, match="nodes/1/position"):
        instance_from_dict(doc)


def test_dangling_reference():
    doc = minimal_doc()
    doc["demands"][0]["dest"] = 7
    with pytest.raises(InstanceError, match="unknown centroid"):
        instance_from_dict(doc)


def test_centroid_on_node_rejected():
    doc = minimal_doc()
    doc["centroids"][0]["position"] = [0, 0]
    with pytest.raises(InstanceError, match="coincides"):
        instance_from_dict(doc)


def test_unchanged_edges_above_old_line():
    doc = minimal_doc()
    doc["params"]["min_unchanged_slow_edges"] = 2
    doc["params"]["max_slow_edges"] = 3
    with pytest.raises(InstanceError, match="old slow line"):
        instance_from_dict(doc)


def test_walk_link_time_at_350_m():
    inst = single_centroid_instance((350.0, 0.0), [(0.0, 0.0), (0.0, 5000.0)],
                                    [(5000.0, 0.0), (5000.0, 100.0)])
    link = [w for w in inst.walk_links if w.centroid == 0 and w.mode == "rapid"]
    assert len(link) == 1
    assert link[0].walk_time == pytest.approx(350 / (5000 / 60))
    assert link[0].walk_time == pytest.approx(4.2)


def test_slow_walk_threshold_excludes_350_m():
    inst = single_centroid_instance((5350.0, 0.0), [(0.0, 0.0), (0.0, 5000.0)],
                                    [(5000.0, 0.0), (9000.0, 5000.0)])
    assert not [w for w in inst.walk_links if w.centroid == 0 and w.mode == "slow"]


def test_equidistant_stations_give_two_links():
    inst = single_centroid_instance((0.0, 0.0), [(-200.0, 0.0), (200.0, 0.0)],
                                    [(5000.0, 0.0), (5000.0, 100.0)])
    assert len([w for w in inst.walk_links if w.centroid == 0 and w.mode == "rapid"]) == 2


@pytest.mark.parametrize("factor,dist,expected", [(2.0, 3000.0, 12.0), (1.0, 3000.0, 6.0),
                                                  (2.0, 500.0, 2.0)])
def test_private_utility(factor, dist, expected):
    inst = single_centroid_instance((0.0, 1000.0), [(0.0, 0.0), (0.0, 5000.0)],
                                    [(5000.0, 0.0), (5000.0, 100.0)],
                                    private_utility_factor=factor)
    inst = replace(inst, centroids=(Centroid(0, (0.0, 1000.0)), Centroid(1, (dist, 1000.0))))
    (pair,) = compute_private_utilities(inst)
    assert pair.private_utility == pytest.approx(expected)


def test_private_utility_coincident_centroids():
    inst = single_centroid_instance((0.0, 1000.0), [(0.0, 0.0), (0.0, 5000.0)],
                                    [(5000.0, 0.0), (5000.0, 100.0)])
    inst = replace(inst, centroids=(Centroid(0, (0.0, 1000.0)), Centroid(1, (0.0, 1000.0))))
    with pytest.raises(InstanceError):
        compute_private_utilities(inst)


def test_filter_toy_drops_zero_pairs():
    base = tiny(1)
    demands = tuple(DemandPair(i, 0, 1 + i % 5, 0.0 if i < 3 else float(i), 10.0) for i in range(10))
    toy = replace(base, demands=demands)
    assert len(filter_by_demand(toy, 0).demands) == 7
    assert len(filter_by_demand(toy, 1e9).demands) == 0
    with pytest.raises(InstanceError):
        filter_by_demand(toy, -1)


def test_seville_like_counts():
    inst = generate_synthetic(2, "seville-like")
    s = inst.summary()
    assert s["nodes"] == 97 and s["centroids"] == 73 and s["pairs"] == SEVILLE_PAIRS
    assert abs(s["edges"] - 247) <= 0.1 * 247
    for threshold, count in DEMAND_LADDER.items():
        assert len(filter_by_demand(inst, threshold).demands) == count


def test_ladder_file_counts():
    inst = ladder(3)
    for threshold, count in DEMAND_LADDER.items():
        assert len(filter_by_demand(inst, threshold).demands) == count


def test_generator_is_deterministic():
    assert generate_synthetic(1, "tiny") == generate_synthetic(1, "tiny")
    with pytest.raises(InstanceError):
        generate_synthetic(1, "huge")


@pytest.mark.parametrize("seed", [1, 5, 9])
def test_invariants_of_generated(seed):
    inst = tiny(seed)
    assert len(inst.arcs) == 2 * len(inst.rapid_edges) + 2 * len(inst.slow_edges)
    for w in inst.walk_links:
        assert inst.walk_distance(w.centroid, w.station, w.mode) <= inst.params.max_walk(w.mode)
    assert derive_walk_links(inst) == inst.walk_links


def test_round_trip_is_canonical(tmp_path):
    for inst in (tiny(2), with_explicit_data(tiny(3))):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        save_instance(inst, a)
        again = load_instance(a)
        save_instance(again, b)
        assert a.read_text() == b.read_text()
        assert again.demands == inst.demands and again.walk_links == inst.walk_links


def test_canonical_json_is_stable():
    doc = instance_to_dict(tiny(4))
    assert canonical_json(doc) == canonical_json(json.loads(canonical_json(doc)))


@functools.lru_cache(maxsize=None)
def ladder(seed):
    return ladder_file_instance(seed)


@given(st.floats(0, 400), st.floats(0, 400))
def test_filter_composes(a, b):
    inst = ladder(0)
    once = filter_by_demand(filter_by_demand(inst, a), b)
    assert once.demands == filter_by_demand(inst, max(a, b)).demands
