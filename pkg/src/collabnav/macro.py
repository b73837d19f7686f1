"""Macro-action families, candidate generation and pruning."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .graph import EdgeBelief, Mode, NavGraph, Status, cost_key, path_cost, shortest_path

DEFAULT_WAIT_QUANTUM = 10.0


@dataclass(frozen=True)
class NavigateGoal:
    path: tuple[int, ...]


@dataclass(frozen=True)
class NavigateAndSense:
    path: tuple[int, ...]
    target: int


@dataclass(frozen=True)
class Wait:
    duration: float


MacroAction = Union[NavigateGoal, NavigateAndSense, Wait]


@dataclass(frozen=True)
class AgentSpec:
    id: str
    speed: float
    start: int
    goal: int
    sense_duration: float = 0.0

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError(f"agent {self.id}: speed must be positive")
        if self.sense_duration < 0:
            raise ValueError(f"agent {self.id}: sense_duration must be non-negative")


def macro_length(g: NavGraph, m: MacroAction) -> float:
    if isinstance(m, Wait):
        return 0.0
    return g.path_length(m.path)


def describe(g: NavGraph, m: MacroAction) -> dict:
    """JSON-friendly description using node names."""
    if isinstance(m, Wait):
        return {"type": "wait", "duration": m.duration}
    out = {"type": "goal" if isinstance(m, NavigateGoal) else "sense",
           "path": [g.names[n] for n in m.path]}
    if isinstance(m, NavigateAndSense):
        out["target"] = g.edge_name(m.target)
    return out


def enumerate_candidates(
    g: NavGraph,
    b: EdgeBelief,
    agent: AgentSpec,
    at: int,
    wait_quantum: float = DEFAULT_WAIT_QUANTUM,
) -> list[MacroAction]:
    """Goal candidate, then sense candidates by edge id, then Wait."""
    out: list[MacroAction] = []
    if at != agent.goal:
        p = shortest_path(g, b, Mode.KNOWN_ONLY, at, agent.goal)
        if p is not None:
            out.append(NavigateGoal(p.nodes))

    unknown = b.unknown()
    for eid in unknown:
        e = g.edges[eid]
        options = []
        for w in sorted((e.u, e.v)):
            p = shortest_path(g, b, Mode.KNOWN_ONLY, at, w)
            if p is not None:
                options.append(p)
        if len(options) == 2 and cost_key(options[0].cost) == cost_key(options[1].cost):
            options = options[:1]
        out.extend(NavigateAndSense(p.nodes, eid) for p in options)

    if unknown:
        out.append(Wait(wait_quantum))
    return out


def optimistic_bound(
    m: MacroAction, g: NavGraph, b: EdgeBelief, agent: AgentSpec, at: int
) -> float:
    """Lower bound on the agent's own time to goal after executing ``m``."""
    if isinstance(m, NavigateGoal):
        return g.path_length(m.path) / agent.speed
    if isinstance(m, NavigateAndSense):
        rest = path_cost(g, b, Mode.OPTIMISTIC, m.path[-1], agent.goal)
        return (g.path_length(m.path) / agent.speed + agent.sense_duration
                + rest / agent.speed)
    return m.duration + path_cost(g, b, Mode.OPTIMISTIC, at, agent.goal) / agent.speed


def relevant_unknown_edges(
    g: NavGraph, b: EdgeBelief, team: Iterable[tuple[AgentSpec, int]]
) -> set[int]:
    """Unknown edges that could matter to some agent's route to its goal.

    An edge qualifies if it lies on an agent's optimistic shortest path, or if
    learning that it is traversable would by itself shorten the agent's
    known-only route.
    """
    unknown = b.unknown()
    if not unknown:
        return set()
    out: set[int] = set()
    for agent, at in team:
        p = shortest_path(g, b, Mode.OPTIMISTIC, at, agent.goal)
        if p is None:
            continue
        on_path = set(g.path_edges(p.nodes))
        out.update(e for e in unknown if e in on_path)
        known = cost_key(path_cost(g, b, Mode.KNOWN_ONLY, at, agent.goal))
        for eid in unknown:
            if eid in out:
                continue
            revealed = b.with_status(eid, Status.TRAVERSABLE)
            if cost_key(path_cost(g, revealed, Mode.KNOWN_ONLY, at, agent.goal)) < known:
                out.add(eid)
    return out


def all_goal_makespan(
    g: NavGraph, b: EdgeBelief, team: Sequence[tuple[AgentSpec, int]]
) -> float:
    """Makespan if every agent heads straight to its goal on known edges."""
    worst = 0.0
    for agent, at in team:
        worst = max(worst, path_cost(g, b, Mode.KNOWN_ONLY, at, agent.goal) / agent.speed)
    return worst


def prune(
    candidates: Sequence[MacroAction],
    g: NavGraph,
    b: EdgeBelief,
    agent: AgentSpec,
    at: int,
    team_upper_bound: float,
    relevant: set[int] | None = None,
) -> list[MacroAction]:
    """Drop irrelevant sensing and candidates that cannot beat the all-goal plan.

    ``relevant`` defaults to the relevant set of this agent alone; team
    planners pass the set computed over the whole team.
    """
    if relevant is None:
        relevant = relevant_unknown_edges(g, b, [(agent, at)])
    kept = []
    for m in candidates:
        if isinstance(m, NavigateGoal):
            kept.append(m)
            continue
        if isinstance(m, NavigateAndSense) and m.target not in relevant:
            continue
        if cost_key(optimistic_bound(m, g, b, agent, at)) > cost_key(team_upper_bound):
            continue
        kept.append(m)
    return kept


def check_macro(g: NavGraph, b: EdgeBelief, agent: AgentSpec, at: int, m: MacroAction) -> list[str]:
    """Structural invariant violations of ``m`` for ``agent`` standing at ``at``."""
    problems = []
    if isinstance(m, Wait):
        if not m.duration > 0:
            problems.append("wait duration must be positive")
        return problems
    path = m.path
    if not path or path[0] != at:
        problems.append("path must start at the agent's node")
    if len(set(path)) != len(path):
        problems.append("path is not simple")
    for eid in g.path_edges(path):
        if eid is None:
            problems.append("path uses a missing edge")
            continue
        e = g.edges[eid]
        if e.stochastic and b[eid] is not Status.TRAVERSABLE:
            problems.append(f"path uses non-traversable edge {g.edge_name(eid)}")
    if isinstance(m, NavigateGoal) and path and path[-1] != agent.goal:
        problems.append("goal path does not end at the goal")
    if isinstance(m, NavigateAndSense):
        if b[m.target] is not Status.UNKNOWN:
            problems.append("sense target is not unknown")
        if path and not g.edges[m.target].touches(path[-1]):
            problems.append("sense path does not end next to the target")
    return problems

