import pytest

from collabnav.errors import LimitExceeded
from collabnav.graph import Status
from collabnav.macro import AgentSpec, NavigateAndSense, NavigateGoal, Wait
from collabnav.oracle import oracle_expected_makespan
from collabnav.planner import initial_state
from collabnav.scenarios import corpus, scout_scenario

from helpers import line_graph


def test_known_graph_value_is_slowest_travel_time():
    g = line_graph([("A", "B", 30), ("B", "C", 20), ("C", "D", 10)])
    agents = [AgentSpec("p", 1.0, 0, 2), AgentSpec("q", 4.0, 3, 0)]
    r = oracle_expected_makespan(g, initial_state(g, agents))
    assert r.value == pytest.approx(max(50 / 1, 60 / 4))
    # q arrives first and interrupts p, which then resumes toward its goal.
    assert all(isinstance(m, NavigateGoal) for j in r.policy_tree.joints() for m in j.values())


def test_scout_value_matches_hand_evaluation():
    # Jackal reaches GH at 10.625 s. Traversable: husky drives 75 m after
    # that (85.625); blocked: 195 m (205.625). Mean: 145.625.
    sc = scout_scenario()
    g = sc.graph
    r = oracle_expected_makespan(g, initial_state(g, sc.agents))
    assert r.value == pytest.approx(0.5 * 85.625 + 0.5 * 205.625)
    root = r.policy_tree
    assert isinstance(root.joint["jackal"], NavigateAndSense)
    assert root.joint["husky"] == Wait(10.0)
    edge = g.edge_by_name("X-GH")
    outcomes = {dict(k)[edge]: child.value for k, child in root.children.items()}
    assert outcomes[Status.BLOCKED] == pytest.approx(205.625 - 10.625)
    assert outcomes[Status.TRAVERSABLE] == pytest.approx(85.625 - 10.625)


def test_limits():
    three = line_graph([("A", "B", 1, 0.5), ("B", "C", 1, 0.5), ("C", "A", 1, 0.5), ("A", "D", 1)])
    with pytest.raises(LimitExceeded):
        oracle_expected_makespan(three, initial_state(three, [AgentSpec("p", 1.0, 0, 3)]))
    big = line_graph([(chr(65 + i), chr(66 + i), 1) for i in range(8)])
    with pytest.raises(LimitExceeded):
        oracle_expected_makespan(big, initial_state(big, [AgentSpec("p", 1.0, 0, 8)]))


def test_pruning_is_safe_on_the_corpus():
    mismatches = []
    for k, sc in enumerate(corpus(200)):
        s = initial_state(sc.graph, sc.agents)
        full = oracle_expected_makespan(sc.graph, s).value
        pruned = oracle_expected_makespan(sc.graph, s, use_pruning=True).value
        if abs(full - pruned) > 1e-9:
            mismatches.append((k, full, pruned))
    assert mismatches == []
