"""Centralized team planning over stochastic graphs.

The collaborative planner picks one macro-action per active agent by scoring
every joint candidate with Monte Carlo rollouts. All candidates are scored on
the same sampled worlds (common random numbers). A rollout simulates the
joint macro-action up to the first completion and the resulting interrupt
cut points, then continues with an optimistic replanning policy in which
every agent senses the edges next to each node it reaches.
"""

from __future__ import annotations

import heapq
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .errors import LimitExceeded, PlanningStuck
from .executor import NavigateEdge, ObserveEdge, WaitFor, cut_index, expand, primitive_duration
from .graph import (
    EdgeBelief,
    Mode,
    NavGraph,
    Status,
    WorldSample,
    cost_key,
    sample_world,
    shortest_path,
)
from .macro import (
    DEFAULT_WAIT_QUANTUM,
    AgentSpec,
    MacroAction,
    NavigateAndSense,
    Wait,
    all_goal_makespan,
    enumerate_candidates,
    macro_length,
    prune,
    relevant_unknown_edges,
)

COLLABORATIVE = "collaborative"
INDEPENDENT = "independent"
MAX_JOINT_CANDIDATES = 10_000


@dataclass(frozen=True)
class AgentState:
    spec: AgentSpec
    node: int
    elapsed: float = 0.0
    done: bool = False


@dataclass(frozen=True)
class TeamState:
    agents: tuple[AgentState, ...]
    belief: EdgeBelief

    @property
    def active(self) -> tuple[AgentState, ...]:
        return tuple(a for a in self.agents if not a.done)

    @property
    def now(self) -> float:
        active = self.active
        return max((a.elapsed for a in active), default=0.0)


@dataclass(frozen=True)
class PlannerParams:
    rollout_count: int = 256
    wait_quantum: float = DEFAULT_WAIT_QUANTUM
    seed: int = 0
    mode: str = COLLABORATIVE
    workers: int = 1
    prune: bool = True

    def __post_init__(self):
        if self.rollout_count < 1:
            raise ValueError("rollout_count must be at least 1")
        if not self.wait_quantum > 0:
            raise ValueError("wait_quantum must be positive")
        if self.mode not in (COLLABORATIVE, INDEPENDENT):
            raise ValueError(f"unknown planner mode {self.mode!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


def initial_state(g: NavGraph, agents: Sequence[AgentSpec], belief: EdgeBelief | None = None) -> TeamState:
    b = EdgeBelief.initial(g) if belief is None else belief
    return TeamState(
        tuple(AgentState(a, a.start, 0.0, a.start == a.goal) for a in agents), b
    )


@dataclass
class Epoch:
    """Graph-fidelity outcome of running one joint macro-action.

    Times are relative to the epoch start. ``end`` is when the last agent
    reaches its cut point and the team can replan.
    """

    end: float
    nodes: list[int]
    finish: list[float]
    observations: list[tuple[int, Status]]
    distance: list[float]
    waited: list[float]
    completed: list[bool]
    primitives_run: list[int] = field(default_factory=list)


def simulate_epoch(
    g: NavGraph,
    agents: Sequence[tuple[AgentSpec, int]],
    joint: Sequence[MacroAction],
    b: EdgeBelief,
    world: WorldSample | None,
) -> Epoch:
    """Run ``joint`` until the first completion and every interrupt cut point.

    With ``world=None`` the observation statuses are left UNKNOWN; the timing
    and motion never depend on the world.
    """
    queues, ends = [], []
    for (agent, _), m in zip(agents, joint):
        q = expand(g, m, b)
        t, e = 0.0, []
        for p in q:
            t = t + primitive_duration(g, agent, p)
            e.append(t)
        queues.append(q)
        ends.append(e)
    first = min(e[-1] for e in ends)

    out = Epoch(0.0, [], [], [], [], [], [])
    for (agent, at), q, e in zip(agents, queues, ends):
        waited_partial = 0.0
        if e[-1] == first:
            last, finish, completed = len(q) - 1, first, True
        else:
            completed = False
            k = next(i for i, end in enumerate(e) if end > first)
            start_k = e[k - 1] if k > 0 else 0.0
            if isinstance(q[k], WaitFor):
                last, finish = k - 1, first
                waited_partial = first - start_k
            elif start_k == first:
                last, finish = k - 1, first
            else:
                last = cut_index(q, k, False)
                finish = e[last]
        node, dist, waited = at, 0.0, waited_partial
        for p in q[: last + 1]:
            if isinstance(p, NavigateEdge):
                node = p.dst
                dist += g.edges[g.edge_between(p.src, p.dst)].length
            elif isinstance(p, ObserveEdge):
                status = Status.UNKNOWN if world is None else world[p.edge]
                out.observations.append((p.edge, status))
            else:
                waited += p.duration
        out.nodes.append(node)
        out.finish.append(finish)
        out.distance.append(dist)
        out.waited.append(waited)
        out.completed.append(completed)
        out.primitives_run.append(last + 1)
    out.end = max(out.finish)
    return out


def merge_observations(b: EdgeBelief, observations) -> EdgeBelief:
    for eid, status in observations:
        if b[eid] is Status.UNKNOWN:
            b = b.with_status(eid, status)
    return b


def base_policy_times(
    g: NavGraph,
    b: EdgeBelief,
    agents: Sequence[tuple[AgentSpec, int]],
    start: float,
    world: WorldSample,
) -> list[float]:
    """Arrival times under the shared optimistic replanning policy.

    Each agent, on reaching a node, senses the adjacent unknown edges (the
    whole team learns the result) and steps along its current optimistic
    shortest path. ``inf`` marks an agent whose goal is unreachable.
    """
    times = [math.inf] * len(agents)
    heap = [(start, i, at) for i, (_, at) in enumerate(agents)]
    heapq.heapify(heap)
    while heap:
        t, i, node = heapq.heappop(heap)
        for _, eid in g.adjacency[node]:
            if g.is_stochastic(eid) and b.status[g.slot(eid)] is Status.UNKNOWN:
                b = b.with_status(eid, world.truth[g.slot(eid)])
        agent = agents[i][0]
        if node == agent.goal:
            times[i] = t
            continue
        p = shortest_path(g, b, Mode.OPTIMISTIC, node, agent.goal)
        if p is None:
            return [math.inf] * len(agents)
        nxt = p.nodes[1]
        step = g.edges[g.edge_between(node, nxt)].length / agent.speed
        heapq.heappush(heap, (t + step, i, nxt))
    return times


def rollout_value(
    g: NavGraph,
    s: TeamState,
    joint: Mapping[str, MacroAction],
    w: WorldSample,
    p: PlannerParams | None = None,
) -> float:
    """Team makespan of ``joint`` followed by the base policy in world ``w``."""
    now = s.now
    done_times = [a.elapsed for a in s.agents if a.done]
    active = [(a.spec, a.node) for a in s.active]
    if not active:
        return max(done_times, default=0.0)
    ep = simulate_epoch(g, active, [joint[a.id] for a, _ in active], s.belief, w)
    b = merge_observations(s.belief, ep.observations)
    t2 = now + ep.end
    arrivals = base_policy_times(
        g, b, [(agent, node) for (agent, _), node in zip(active, ep.nodes)], t2, w
    )
    # Agents that finish exactly at their goal during the epoch arrive then.
    for k, ((agent, _), node) in enumerate(zip(active, ep.nodes)):
        if node == agent.goal:
            arrivals[k] = now + ep.finish[k]
    return max(done_times + arrivals)


def _joint_sort_key(value: float, joint: Sequence[MacroAction], g: NavGraph, idx: tuple[int, ...]):
    waits = sum(isinstance(m, Wait) for m in joint)
    length = cost_key(sum(macro_length(g, m) for m in joint))
    return (cost_key(value), waits, length, idx)


class _Scorer:
    """Mean rollout value over a fixed world set, with per-world caching.

    Rollouts are deterministic given the world, so identical worlds are
    simulated once; the mean is always reduced in world-index order.
    """

    def __init__(self, g: NavGraph, s: TeamState, p: PlannerParams):
        self.g, self.s, self.p = g, s, p
        self.worlds = [sample_world(g, s.belief, p.seed + i) for i in range(p.rollout_count)]
        distinct: dict[tuple, WorldSample] = {}
        for w in self.worlds:
            distinct.setdefault(w.truth, w)
        self.distinct = list(distinct.values())
        self.evaluated_worlds: list[tuple] = []

    def score(self, joint: Mapping[str, MacroAction]) -> float:
        if self.p.workers > 1 and len(self.distinct) > 1:
            with ThreadPoolExecutor(self.p.workers) as pool:
                values = list(pool.map(lambda w: rollout_value(self.g, self.s, joint, w, self.p), self.distinct))
        else:
            values = [rollout_value(self.g, self.s, joint, w, self.p) for w in self.distinct]
        by_truth = {w.truth: v for w, v in zip(self.distinct, values)}
        self.evaluated_worlds.append(tuple(w.truth for w in self.worlds))
        total = 0.0
        for w in self.worlds:
            total += by_truth[w.truth]
        return total / len(self.worlds)


def _stuck_agents(g: NavGraph, s: TeamState) -> list[str]:
    return [
        a.spec.id for a in s.active
        if shortest_path(g, s.belief, Mode.OPTIMISTIC, a.node, a.spec.goal) is None
    ]


def candidate_sets(g: NavGraph, s: TeamState, p: PlannerParams) -> list[list[MacroAction]]:
    """Pruned per-agent candidate lists for the active agents."""
    team = [(a.spec, a.node) for a in s.active]
    upper = all_goal_makespan(g, s.belief, team)
    relevant = relevant_unknown_edges(g, s.belief, team)
    out = []
    for agent, at in team:
        cands = enumerate_candidates(g, s.belief, agent, at, p.wait_quantum)
        if p.prune:
            cands = prune(cands, g, s.belief, agent, at, upper, relevant)
        out.append(cands)
    return out


def plan_joint(g: NavGraph, s: TeamState, p: PlannerParams, trace: list | None = None) -> dict[str, MacroAction]:
    """Joint macro-action minimizing the mean rollout makespan.

    ``trace``, when given, receives one tuple of world truths per scored
    candidate; every entry is identical by construction.
    """
    active = s.active
    if not active:
        raise ValueError("every agent is already done")
    stuck = _stuck_agents(g, s)
    if stuck:
        raise PlanningStuck(f"goal unreachable for {', '.join(stuck)}")
    per_agent = candidate_sets(g, s, p)
    for a, cands in zip(active, per_agent):
        if not cands:
            raise PlanningStuck(f"no macro-action available for {a.spec.id}")

    n_joint = math.prod(len(c) for c in per_agent)
    if n_joint > MAX_JOINT_CANDIDATES:
        raise LimitExceeded(f"{n_joint} joint candidates exceeds {MAX_JOINT_CANDIDATES}")

    scorer = _Scorer(g, s, p)
    best = None
    for idx in itertools.product(*(range(len(c)) for c in per_agent)):
        joint = [per_agent[k][i] for k, i in enumerate(idx)]
        if all(isinstance(m, Wait) for m in joint):
            continue
        mapping = {a.spec.id: m for a, m in zip(active, joint)}
        key = _joint_sort_key(scorer.score(mapping), joint, g, idx)
        if best is None or key < best[0]:
            best = (key, mapping)
    if trace is not None:
        trace.extend(scorer.evaluated_worlds)
    if best is None:
        raise PlanningStuck("every joint candidate is all-wait")
    return best[1]


def plan_independent(g: NavGraph, s: TeamState, p: PlannerParams) -> dict[str, MacroAction]:
    """Each agent plans alone for its own expected completion time.

    Sensing is limited to edges relevant to the agent's own route and waiting
    is never considered.
    """
    stuck = _stuck_agents(g, s)
    if stuck:
        raise PlanningStuck(f"goal unreachable for {', '.join(stuck)}")
    out = {}
    for a in s.active:
        solo = TeamState((replace(a, elapsed=0.0),), s.belief)
        team = [(a.spec, a.node)]
        cands = [m for m in enumerate_candidates(g, s.belief, a.spec, a.node, p.wait_quantum)
                 if not isinstance(m, Wait)]
        if p.prune:
            upper = all_goal_makespan(g, s.belief, team)
            cands = prune(cands, g, s.belief, a.spec, a.node, upper,
                          relevant_unknown_edges(g, s.belief, team))
        else:
            relevant = relevant_unknown_edges(g, s.belief, team)
            cands = [m for m in cands if not isinstance(m, NavigateAndSense) or m.target in relevant]
        if not cands:
            raise PlanningStuck(f"no macro-action available for {a.spec.id}")
        scorer = _Scorer(g, solo, p)
        best = None
        for i, m in enumerate(cands):
            key = _joint_sort_key(scorer.score({a.spec.id: m}), [m], g, (i,))
            if best is None or key < best[0]:
                best = (key, m)
        out[a.spec.id] = best[1]
    return out


def plan(g: NavGraph, s: TeamState, p: PlannerParams) -> dict[str, MacroAction]:
    if p.mode == INDEPENDENT:
        return plan_independent(g, s, p)
    return plan_joint(g, s, p)

