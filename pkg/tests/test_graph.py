import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collabnav.errors import ConflictError, ParseError, ValidationError
from collabnav.graph import (
    Edge,
    EdgeBelief,
    Mode,
    NavGraph,
    Status,
    apply_observation,
    dump_graph,
    enumerate_worlds,
    load_graph,
    path_cost,
    sample_world,
    shortest_path,
)
from collabnav.scenarios import random_instance

from helpers import brute_force_path, line_graph, random_belief


def doc(nodes, edges):
    return json.dumps({
        "nodes": [{"id": n, "x": x, "y": y} for n, x, y in nodes],
        "edges": edges,
    })


ABC = [("A", 0, 0), ("B", 100, 0), ("C", 100, 100)]


def test_load_graph_defaults_length_to_euclidean():
    g = load_graph(doc(ABC, [{"u": "A", "v": "B"}, {"u": "B", "v": "C", "rho": 0.4}]))
    assert [e.length for e in g.edges] == [100.0, 100.0]
    assert g.edges[0].rho is None
    assert g.edges[1].rho == 0.4
    assert g.stochastic_ids == (1,)


def test_load_graph_names_dangling_node():
    with pytest.raises(ValidationError) as err:
        load_graph(doc(ABC, [{"u": "A", "v": "B"}, {"u": "B", "v": "D"}]))
    assert any("unknown node D" in v for v in err.value.violations)


def test_load_graph_rejects_rho_out_of_range():
    nodes = ABC + [("D", 0, 100)]
    edges = [{"u": "A", "v": "B"}, {"u": "B", "v": "C"}, {"u": "C", "v": "D", "rho": 1.5}]
    with pytest.raises(ValidationError) as err:
        load_graph(doc(nodes, edges))
    assert "rho out of range" in str(err.value)
    assert "C-D" in str(err.value)


@pytest.mark.parametrize("edges, fragment", [
    ([{"u": "A", "v": "B"}], "disconnected"),
    ([{"u": "A", "v": "B"}, {"u": "B", "v": "A"}, {"u": "B", "v": "C"}], "duplicate"),
    ([{"u": "A", "v": "A"}, {"u": "A", "v": "B"}, {"u": "B", "v": "C"}], "self-loop"),
    ([{"u": "A", "v": "B", "length": 0}, {"u": "B", "v": "C"}], "length"),
])
def test_load_graph_structural_violations(edges, fragment):
    with pytest.raises(ValidationError) as err:
        load_graph(doc(ABC, edges))
    assert fragment in str(err.value)


def test_load_graph_bad_json():
    with pytest.raises(ParseError):
        load_graph("{nodes: ")


def test_dump_round_trip():
    g = load_graph(doc(ABC, [{"u": "A", "v": "B"}, {"u": "B", "v": "C", "rho": 0.4, "length": 120}]))
    h = load_graph(dump_graph(g))
    assert h.names == g.names and h.edges == g.edges


def test_single_edge_both_modes():
    g = line_graph([("A", "B", 100)])
    b = EdgeBelief.initial(g)
    for mode in Mode:
        p = shortest_path(g, b, mode, 0, 1)
        assert p.nodes == (0, 1) and p.cost == 100


def test_optimistic_takes_unknown_shortcut():
    g = line_graph([("A", "B", 100), ("A", "C", 50), ("C", "B", 40, 0.5)])
    b = EdgeBelief.initial(g)
    A, B, C = 0, 1, 2
    assert shortest_path(g, b, Mode.OPTIMISTIC, A, B) == ((A, C, B), 90.0)
    assert shortest_path(g, b, Mode.KNOWN_ONLY, A, B) == ((A, B), 100.0)
    # Learning the edge is open makes it usable for known-only routing too.
    b2 = apply_observation(b, 2, Status.TRAVERSABLE)
    assert shortest_path(g, b2, Mode.KNOWN_ONLY, A, B).cost == 90.0


def test_blocked_only_route_is_unreachable():
    g = line_graph([("A", "C", 50), ("C", "B", 40, 0.5)])
    b = apply_observation(EdgeBelief.initial(g), 1, Status.BLOCKED)
    for mode in Mode:
        assert shortest_path(g, b, mode, 0, 1) is None
        assert path_cost(g, b, mode, 0, 1) == math.inf


def test_tie_break_prefers_fewer_edges_then_smaller_ids():
    # A-B-D and A-C-D and A-D all cost 20; the direct edge wins.
    g = line_graph([("A", "B", 10), ("B", "D", 10), ("A", "C", 10), ("C", "D", 10), ("A", "D", 20)])
    b = EdgeBelief.initial(g)
    assert shortest_path(g, b, Mode.OPTIMISTIC, 0, 3).nodes == (0, 3)
    g = line_graph([("A", "C", 10), ("C", "D", 10), ("A", "B", 10), ("B", "D", 10)])
    assert shortest_path(g, EdgeBelief.initial(g), Mode.OPTIMISTIC, 0, 3).nodes == (0, 1, 3)


def test_sample_world_degenerate_and_known():
    g = NavGraph(["A", "B", "C"], [(0, 0), (1, 0), (2, 0)],
                 [Edge(0, 1, 1.0, 0.0), Edge(1, 2, 1.0, 0.5)])
    b = EdgeBelief.initial(g)
    for seed in range(200):
        assert sample_world(g, b, seed)[0] is Status.TRAVERSABLE
    blocked = EdgeBelief(g.stochastic_ids, (Status.BLOCKED, Status.BLOCKED))
    for seed in range(20):
        assert set(sample_world(g, blocked, seed).truth) == {Status.BLOCKED}


def test_sample_world_frequency_matches_rho():
    g = line_graph([("A", "B", 10, 0.5)])
    b = EdgeBelief.initial(g)
    blocked = sum(sample_world(g, b, seed)[0] is Status.BLOCKED for seed in range(10_000))
    assert abs(blocked / 10_000 - 0.5) <= 0.02


def test_sample_world_is_deterministic():
    sc = random_instance(3)
    b = EdgeBelief.initial(sc.graph)
    assert sample_world(sc.graph, b, 11) == sample_world(sc.graph, b, 11)


def test_apply_observation_transitions():
    g = line_graph([("A", "B", 10, 0.5)])
    b = EdgeBelief.initial(g)
    kb = apply_observation(b, 0, Status.BLOCKED)
    assert kb[0] is Status.BLOCKED and b[0] is Status.UNKNOWN
    assert apply_observation(kb, 0, Status.BLOCKED) == kb
    kt = apply_observation(b, 0, Status.TRAVERSABLE)
    with pytest.raises(ConflictError):
        apply_observation(kt, 0, Status.BLOCKED)


def test_enumerate_worlds_probabilities():
    g = line_graph([("A", "B", 10, 0.3), ("B", "C", 10, 0.6), ("A", "C", 30)])
    worlds = enumerate_worlds(g, EdgeBelief.initial(g))
    assert len(worlds) == 4
    assert math.isclose(sum(p for _, p in worlds), 1.0)
    probs = {w.truth: p for w, p in worlds}
    assert math.isclose(probs[(Status.BLOCKED, Status.BLOCKED)], 0.18)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10_000), statuses=st.lists(st.sampled_from(list(Status)), min_size=2, max_size=2),
       src=st.integers(0, 7), dst=st.integers(0, 7))
def test_shortest_path_matches_brute_force(seed, statuses, src, dst):
    g = random_instance(seed).graph
    src, dst = src % len(g), dst % len(g)
    b = random_belief(g, statuses)
    for mode in Mode:
        got = shortest_path(g, b, mode, src, dst)
        ref = brute_force_path(g, b, mode, src, dst)
        if ref is None:
            assert got is None
            continue
        assert got.nodes == ref[0]
        assert math.isclose(got.cost, ref[1], abs_tol=1e-9)
        for a, c in zip(got.nodes, got.nodes[1:]):
            eid = g.edge_between(a, c)
            if g.is_stochastic(eid):
                assert b[eid] is not Status.BLOCKED
                if mode is Mode.KNOWN_ONLY:
                    assert b[eid] is Status.TRAVERSABLE


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10_000), statuses=st.lists(st.sampled_from(list(Status)), min_size=2, max_size=2))
def test_optimistic_never_costs_more(seed, statuses):
    g = random_instance(seed).graph
    b = random_belief(g, statuses)
    for dst in range(len(g)):
        opt = path_cost(g, b, Mode.OPTIMISTIC, 0, dst)
        known = path_cost(g, b, Mode.KNOWN_ONLY, 0, dst)
        assert opt <= known


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), draw=st.integers(0, 2**31))
def test_sampled_world_consistent_with_belief(seed, draw):
    g = random_instance(seed).graph
    b = EdgeBelief.initial(g)
    w = sample_world(g, b, draw)
    eid = g.stochastic_ids[0]
    b1 = apply_observation(b, eid, w[eid])
    w1 = sample_world(g, b1, draw)
    assert w1.consistent_with(b1)
    # One draw per stochastic edge: the other edges keep their realization.
    assert w1.truth == w.truth
