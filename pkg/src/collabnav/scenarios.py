"""Bundled scenarios and the seeded small-instance corpus."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, ParseError
from .graph import Edge, NavGraph, load_graph, parse_graph
from .macro import AgentSpec
from .planner import PlannerParams


@dataclass
class Scenario:
    graph: NavGraph
    agents: list[AgentSpec]
    planner: PlannerParams


def parse_scenario(data: dict, g: NavGraph) -> tuple[list[AgentSpec], PlannerParams]:
    """Agents and planner parameters from a decoded scenario document."""
    try:
        raw_agents = data["agents"]
    except (KeyError, TypeError):
        raise ConfigError("scenario needs an 'agents' list") from None
    agents = []
    for rec in raw_agents:
        try:
            start, goal = g.node(str(rec["start"])), g.node(str(rec["goal"]))
            agents.append(
                AgentSpec(
                    id=str(rec["id"]),
                    speed=float(rec["speed"]),
                    start=start,
                    goal=goal,
                    sense_duration=float(rec.get("sense_duration", 0.0)),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"scenario agent record {rec!r}: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scenario agent record {rec!r}: {exc}") from None
    if len({a.id for a in agents}) != len(agents):
        raise ConfigError("agent ids must be unique")
    p = data.get("planner", {}) or {}
    try:
        params = PlannerParams(
            rollout_count=int(p.get("rollouts", 256)),
            wait_quantum=float(p.get("wait_quantum", 10.0)),
            seed=int(p.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario planner block: {exc}") from None
    return agents, params


def load_scenario(text: str, g: NavGraph) -> tuple[list[AgentSpec], PlannerParams]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario file is not valid JSON: {exc}") from None
    return parse_scenario(data, g)


def data_text(name: str) -> str:
    return resources.files("collabnav").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def scout_scenario(rho: float = 0.5) -> Scenario:
    """Desk-scale two-robot scene: a slow robot whose short route crosses one
    edge of unknown status, next to a robot eight times faster that can
    reach the far end of that edge with a modest detour."""
    data = json.loads(data_text("scout_graph.json"))
    for rec in data["edges"]:
        if "rho" in rec:
            rec["rho"] = rho
    g = parse_graph(data)
    agents, params = load_scenario(data_text("scout_scenario.json"), g)
    return Scenario(g, agents, params)


def random_instance(seed: int, max_nodes: int = 8, max_unknown: int = 2) -> Scenario:
    """Small random instance for oracle comparisons.

    Nodes are scattered on a 100 m square and joined by a deterministic
    spanning tree (so every world is solvable) plus a few extra edges, up to
    ``max_unknown`` of them stochastic. Two agents with distinct speeds get
    distinct start/goal pairs.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, max_nodes + 1))
    pts = rng.uniform(0.0, 100.0, size=(n, 2))
    names = [f"N{i}" for i in range(n)]

    def dist(a, b):
        return float(math.hypot(*(pts[a] - pts[b])))

    edges = []
    pairs = set()
    for i in range(1, n):
        # Attach to the nearest already-placed node.
        j = min(range(i), key=lambda k: dist(i, k))
        edges.append(Edge(j, i, dist(i, j)))
        pairs.add(frozenset((i, j)))

    candidates = [(a, b) for a in range(n) for b in range(a + 1, n) if frozenset((a, b)) not in pairs]
    rng.shuffle(candidates)
    n_unknown = int(rng.integers(1, max_unknown + 1))
    n_extra_det = int(rng.integers(0, 3))
    for a, b in candidates[:n_unknown]:
        edges.append(Edge(a, b, dist(a, b), float(rng.uniform(0.1, 0.9))))
    for a, b in candidates[n_unknown : n_unknown + n_extra_det]:
        edges.append(Edge(a, b, dist(a, b)))

    g = NavGraph(names, [tuple(p) for p in pts], edges)
    ends = rng.permutation(n)
    speeds = rng.choice([1.0, 2.0, 4.0, 8.0], size=2, replace=False)
    agents = [
        AgentSpec("a0", float(speeds[0]), int(ends[0]), int(ends[1])),
        AgentSpec("a1", float(speeds[1]), int(ends[2]), int(ends[3])),
    ]
    return Scenario(g, agents, PlannerParams(seed=seed))


def corpus(count: int = 200, first_seed: int = 0) -> list[Scenario]:
    return [random_instance(seed) for seed in range(first_seed, first_seed + count)]


def load_graph_file(path) -> NavGraph:
    with open(path, encoding="utf-8") as fh:
        return load_graph(fh.read())
