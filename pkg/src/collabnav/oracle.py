"""Exact optimal expected makespan for small instances.

Decision epochs are the trial start and every first-completion interrupt, as
in the deployed loop. Within a fixed belief the team moves deterministically,
so each belief level is a shortest-path problem over agent positions (solved
by Bellman-Ford relaxation); sensing branches into levels with fewer unknown
edges, which are solved first by recursion.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import LimitExceeded
from .graph import EdgeBelief, NavGraph, Status, enumerate_worlds
from .macro import AgentSpec, MacroAction, Wait, enumerate_candidates
from .planner import AgentState, PlannerParams, TeamState, candidate_sets, merge_observations, simulate_epoch

State = tuple[tuple[int, ...], tuple[bool, ...]]


@dataclass
class PolicyNode:
    """One decision: the joint action, its expected remaining time, and the
    subtree for each observation outcome (keyed by revealed edge statuses)."""

    joint: dict[str, MacroAction] | None
    value: float
    children: dict[tuple[tuple[int, Status], ...], PolicyNode] = field(default_factory=dict)

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children.values()), default=0)

    def joints(self):
        """Every joint action appearing in the tree."""
        if self.joint is not None:
            yield self.joint
        for c in self.children.values():
            yield from c.joints()


@dataclass
class OracleResult:
    value: float
    policy_tree: PolicyNode


@dataclass
class _Option:
    joint: tuple[MacroAction, ...]
    delta: float
    # (probability, revealed statuses, next belief, next state)
    branches: list[tuple[float, tuple, EdgeBelief, State]]


class _Solver:
    def __init__(self, g: NavGraph, agents: Sequence[AgentSpec], wait_quantum: float, use_pruning: bool):
        self.g = g
        self.agents = list(agents)
        self.params = PlannerParams(rollout_count=1, wait_quantum=wait_quantum, prune=use_pruning)
        self.values: dict[tuple[EdgeBelief, State], float] = {}
        self.best: dict[tuple[EdgeBelief, State], _Option | None] = {}

    def _team_state(self, b: EdgeBelief, state: State) -> TeamState:
        nodes, done = state
        return TeamState(
            tuple(AgentState(a, n, 0.0, d) for a, n, d in zip(self.agents, nodes, done)), b
        )

    def _options(self, b: EdgeBelief, state: State) -> list[_Option]:
        nodes, done = state
        s = self._team_state(b, state)
        active = [i for i, d in enumerate(done) if not d]
        if self.params.prune:
            per_agent = candidate_sets(self.g, s, self.params)
        else:
            per_agent = [
                enumerate_candidates(self.g, b, self.agents[i], nodes[i], self.params.wait_quantum)
                for i in active
            ]
        worlds = enumerate_worlds(self.g, b)
        team = [(self.agents[i], nodes[i]) for i in active]
        out = []
        for joint in itertools.product(*per_agent):
            if all(isinstance(m, Wait) for m in joint):
                continue
            ep = simulate_epoch(self.g, team, joint, b, None)
            new_nodes = list(nodes)
            for i, n in zip(active, ep.nodes):
                new_nodes[i] = n
            new_done = tuple(d or new_nodes[i] == self.agents[i].goal for i, d in enumerate(done))
            nxt = (tuple(new_nodes), new_done)
            observed = [eid for eid, _ in ep.observations]
            if not observed:
                out.append(_Option(joint, ep.end, [(1.0, (), b, nxt)]))
                continue
            grouped: dict[tuple, list] = {}
            for w, prob in worlds:
                revealed = tuple(sorted({(eid, w[eid]) for eid in observed}))
                if revealed in grouped:
                    grouped[revealed][0] += prob
                else:
                    nb = merge_observations(b, revealed)
                    grouped[revealed] = [prob, nb]
            branches = [(prob, rev, nb, nxt) for rev, (prob, nb) in grouped.items()]
            out.append(_Option(joint, ep.end, branches))
        return out

    def value(self, b: EdgeBelief, state: State) -> float:
        key = (b, state)
        if key not in self.values:
            self._solve_level(b, state)
        return self.values[key]

    def _solve_level(self, b: EdgeBelief, start: State) -> None:
        options: dict[State, list[_Option]] = {}
        todo = [start]
        while todo:
            st = todo.pop()
            if st in options or (b, st) in self.values:
                continue
            if all(st[1]):
                options[st] = []
                continue
            opts = self._options(b, st)
            options[st] = opts
            for o in opts:
                for _, _, nb, nxt in o.branches:
                    if nb == b and nxt not in options:
                        todo.append(nxt)

        # Lower levels first; their values are fixed during relaxation.
        for opts in options.values():
            for o in opts:
                for _, _, nb, nxt in o.branches:
                    if nb != b:
                        self.value(nb, nxt)

        V = {st: (0.0 if all(st[1]) else math.inf) for st in options}
        choice: dict[State, _Option | None] = {st: None for st in options}

        def v_of(nb: EdgeBelief, nxt: State) -> float:
            if nb == b:
                return V[nxt] if nxt in V else self.values[(b, nxt)]
            return self.values[(nb, nxt)]

        changed = True
        while changed:
            changed = False
            for st, opts in options.items():
                for o in opts:
                    q = o.delta
                    for prob, _, nb, nxt in o.branches:
                        if prob > 0:
                            q += prob * v_of(nb, nxt)
                    if q < V[st]:
                        V[st] = q
                        choice[st] = o
                        changed = True
        for st in options:
            self.values[(b, st)] = V[st]
            self.best[(b, st)] = choice[st]

    def tree(self, b: EdgeBelief, state: State) -> PolicyNode:
        o = self.best.get((b, state))
        node = PolicyNode(None, self.values[(b, state)])
        if o is None:
            return node
        active = [a for a, d in zip(self.agents, state[1]) if not d]
        node.joint = {a.id: m for a, m in zip(active, o.joint)}
        for prob, revealed, nb, nxt in o.branches:
            if prob > 0:
                node.children[revealed] = self.tree(nb, nxt)
        return node


def oracle_expected_makespan(
    g: NavGraph,
    s: TeamState,
    max_unknown: int = 2,
    max_nodes: int = 8,
    wait_quantum: float = 10.0,
    use_pruning: bool = False,
) -> OracleResult:
    """Optimal expected team makespan over the full macro-action decision tree.

    ``use_pruning`` restricts the search to candidates that survive the
    planner's pruning; comparing both values checks that pruning is safe.
    """
    unknown = s.belief.unknown()
    if len(unknown) > max_unknown:
        raise LimitExceeded(f"{len(unknown)} unknown edges exceeds the limit of {max_unknown}")
    if len(g) > max_nodes:
        raise LimitExceeded(f"{len(g)} nodes exceeds the limit of {max_nodes}")

    agents = [a.spec for a in s.agents]
    solver = _Solver(g, agents, wait_quantum, use_pruning)
    state = (tuple(a.node for a in s.agents), tuple(a.done for a in s.agents))
    remaining = solver.value(s.belief, state)
    done_max = max((a.elapsed for a in s.agents if a.done), default=0.0)
    value = max(done_max, s.now + remaining) if s.active else done_max
    return OracleResult(value, solver.tree(s.belief, state))
