import functools
import os

import pytest
from hypothesis import HealthCheck, settings

from indnet.generator import generate_synthetic

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

TINY_SEEDS = tuple(range(1, 26))


@functools.lru_cache(maxsize=None)
def tiny(seed: int):
    return generate_synthetic(seed, "tiny")


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


def make_instance(nodes, edges, centroids, demands, name="hand", **params):
    """Hand-built instance from plain tuples.

    ``nodes``: (x, y, flags) where flags is a string over ``R S o d O D``
    (rapid, slow, rapid origin/dest, slow origin/dest).  ``edges``:
    (i, j, flags) over ``R S old``-style letters ``R``, ``S``, ``*`` (old line).
    ``demands``: (origin, dest, demand) or with a fourth private-utility entry.
    """
    from indnet.instance import Centroid, Edge, InstanceParams, Node, build_instance

    node_objs = [Node(k, (float(x), float(y)), "R" in f, "S" in f, "o" in f, "d" in f,
                      "O" in f, "D" in f) for k, (x, y, f) in enumerate(nodes)]
    edge_objs = []
    for k, (i, j, f) in enumerate(edges):
        (xi, yi), (xj, yj) = node_objs[i].position, node_objs[j].position
        length = ((xi - xj) ** 2 + (yi - yj) ** 2) ** 0.5
        edge_objs.append(Edge(k, (i, j), "R" in f, "S" in f, length, "*" in f))
    cents = [Centroid(k, (float(x), float(y))) for k, (x, y) in enumerate(centroids)]
    pairs = []
    for k, d in enumerate(demands):
        rec = {"id": k, "origin": d[0], "dest": d[1], "demand": d[2]}
        if len(d) > 3:
            rec["private_utility"] = d[3]
        pairs.append(rec)
    return build_instance(InstanceParams(**params), node_objs, edge_objs, cents, pairs, name=name)


def two_station_instance(**params):
    """Rapid edge 0-1 and slow edge 2-3; one pair walking to the rapid ends only."""
    base = dict(max_rapid_edges=1, max_slow_edges=1, min_unchanged_slow_edges=1,
                private_utility_factor=4.0)
    base.update(params)
    return make_instance(
        [(0, 0, "Ro"), (1000, 0, "Rd"), (0, 500, "SO"), (1000, 500, "SD")],
        [(0, 1, "R"), (2, 3, "S*")],
        [(0, 100), (1000, 100)],
        [(0, 1, 5)],
        **base)
