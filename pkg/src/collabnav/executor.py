"""Per-agent macro-action execution.

A macro-action is expanded into primitives (navigate along an edge, observe
an edge, wait). :class:`AgentExec` sequences them, retries failed navigation
against four shifted goals, and applies the interrupt cut rule so that an
agent always stops on a graph node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

from .errors import ProtocolError
from .graph import EdgeBelief, NavGraph, Position, Status
from .macro import AgentSpec, MacroAction, NavigateAndSense, NavigateGoal, Wait

DEFAULT_DELTA = 0.5
MAX_RETRIES = 4


@dataclass(frozen=True)
class NavigateEdge:
    src: int
    dst: int


@dataclass(frozen=True)
class ObserveEdge:
    edge: int
    node: int


@dataclass(frozen=True)
class WaitFor:
    duration: float


Primitive = Union[NavigateEdge, ObserveEdge, WaitFor]


def _adjacent_unknown(g: NavGraph, b: EdgeBelief, node: int) -> list[int]:
    return sorted(
        eid for _, eid in g.adjacency[node]
        if g.is_stochastic(eid) and b[eid] is Status.UNKNOWN
    )


def expand(g: NavGraph, m: MacroAction, b: EdgeBelief) -> list[Primitive]:
    """Primitive sequence for ``m`` under the belief it was issued with.

    Arriving at a node adjacent to unknown edges adds an observation of each
    (ascending edge id). A sense macro observes its target last.
    """
    if isinstance(m, Wait):
        return [WaitFor(m.duration)]
    target = m.target if isinstance(m, NavigateAndSense) else None
    out: list[Primitive] = []
    for a, c in zip(m.path, m.path[1:]):
        out.append(NavigateEdge(a, c))
        out.extend(ObserveEdge(eid, c) for eid in _adjacent_unknown(g, b, c) if eid != target)
    if target is not None:
        out.append(ObserveEdge(target, m.path[-1]))
    return out


def alternative_goals(target: Position, delta: float = DEFAULT_DELTA) -> list[Position]:
    if not delta > 0:
        raise ValueError("delta must be positive")
    x, y = target
    return [(x + delta, y), (x - delta, y), (x, y + delta), (x, y - delta)]


def cut_index(queue: Sequence[Primitive], cursor: int, at_boundary: bool) -> int:
    """Index of the last primitive to run after an interrupt.

    A wait stops at once (it is kept, truncated). At a primitive boundary the
    macro stops before the in-flight primitive. Otherwise the in-flight
    navigation or observation finishes together with the run of observations
    that directly follows it.
    """
    current = queue[cursor]
    if isinstance(current, WaitFor):
        return cursor
    if at_boundary:
        return cursor - 1
    last = cursor
    while last + 1 < len(queue) and isinstance(queue[last + 1], ObserveEdge):
        last += 1
    return last


def primitive_duration(g: NavGraph, agent: AgentSpec, p: Primitive) -> float:
    """Duration at graph fidelity."""
    if isinstance(p, NavigateEdge):
        return g.edges[g.edge_between(p.src, p.dst)].length / agent.speed
    if isinstance(p, ObserveEdge):
        return agent.sense_duration
    return p.duration


@dataclass(frozen=True)
class Success:
    observation: Status | None = None
    distance: float = 0.0
    waited: float = 0.0


@dataclass(frozen=True)
class NavFailure:
    distance: float = 0.0


@dataclass(frozen=True)
class MacroResult:
    agent: str
    success: bool
    final_node: int
    observations: tuple[tuple[int, Status], ...]
    distance_traveled: float
    wait_time: float
    interrupted: bool = False
    failed_primitive: Primitive | None = None


@dataclass(frozen=True)
class Continue:
    next: Primitive


@dataclass(frozen=True)
class Retry:
    alt_goal: Position
    attempt: int


@dataclass(frozen=True)
class MacroDone:
    result: MacroResult


@dataclass(frozen=True)
class CutPoint:
    terminate_after: int


@dataclass
class AgentExec:
    agent: AgentSpec
    graph: NavGraph
    node: int
    pose: Position | None = None
    delta: float = DEFAULT_DELTA
    queue: list[Primitive] = field(default_factory=list)
    cursor: int = 0
    attempt: int = 0
    interrupt_latched: bool = False
    current_macro: MacroAction | None = None
    _cut: int | None = None
    _observations: list = field(default_factory=list)
    _distance: float = 0.0
    _waited: float = 0.0

    def __post_init__(self):
        if self.pose is None:
            self.pose = self.graph.positions[self.node]

    @property
    def busy(self) -> bool:
        return self.current_macro is not None

    @property
    def current(self) -> Primitive:
        if not self.busy:
            raise ProtocolError(f"agent {self.agent.id} has no primitive in flight")
        return self.queue[self.cursor]

    @property
    def nav_goal(self) -> Position:
        """Where the in-flight navigation is currently aiming."""
        p = self.current
        if not isinstance(p, NavigateEdge):
            raise ProtocolError("in-flight primitive is not a navigation")
        goal = self.graph.positions[p.dst]
        if self.attempt == 0:
            return goal
        return alternative_goals(goal, self.delta)[self.attempt - 1]

    def assign(self, m: MacroAction, b: EdgeBelief) -> Primitive:
        if self.busy:
            raise ProtocolError(f"agent {self.agent.id} already executing a macro-action")
        self.queue = expand(self.graph, m, b)
        self.cursor = 0
        self.attempt = 0
        self.interrupt_latched = False
        self.current_macro = m
        self._cut = None
        self._observations = []
        self._distance = 0.0
        self._waited = 0.0
        return self.queue[0]

    def _finish(self, success: bool, failed: Primitive | None = None) -> MacroDone:
        result = MacroResult(
            agent=self.agent.id,
            success=success,
            final_node=self.node,
            observations=tuple(self._observations),
            distance_traveled=self._distance,
            wait_time=self._waited,
            interrupted=self.interrupt_latched,
            failed_primitive=failed,
        )
        self.current_macro = None
        self.queue = []
        self.cursor = 0
        self.attempt = 0
        self._cut = None
        self.interrupt_latched = False
        return MacroDone(result)

    def on_primitive_result(self, r: Success | NavFailure) -> Continue | Retry | MacroDone:
        p = self.current
        if isinstance(r, NavFailure):
            if not isinstance(p, NavigateEdge):
                raise ProtocolError("navigation failure reported for a non-navigation primitive")
            self._distance += r.distance
            if self.attempt < MAX_RETRIES:
                self.attempt += 1
                return Retry(self.nav_goal, self.attempt)
            return self._finish(False, p)

        self._distance += r.distance
        self._waited += r.waited
        if isinstance(p, NavigateEdge):
            self.node = p.dst
        elif isinstance(p, ObserveEdge):
            if r.observation not in (Status.TRAVERSABLE, Status.BLOCKED):
                raise ProtocolError("observation result must be TRAVERSABLE or BLOCKED")
            self._observations.append((p.edge, r.observation))
        self.attempt = 0

        if self._cut is not None and self.cursor >= self._cut:
            return self._finish(True)
        self.cursor += 1
        if self.cursor == len(self.queue):
            return self._finish(True)
        return Continue(self.queue[self.cursor])

    def on_interrupt(self, at_boundary: bool = False) -> CutPoint:
        if not self.busy:
            raise ProtocolError(f"interrupt for idle agent {self.agent.id}")
        if self.interrupt_latched:
            return CutPoint(self._cut)
        self.interrupt_latched = True
        self._cut = cut_index(self.queue, self.cursor, at_boundary)
        return CutPoint(self._cut)

    def abort(self) -> MacroDone:
        """Stop before the in-flight primitive (interrupt at a boundary)."""
        if self._cut is None or self._cut >= self.cursor:
            raise ProtocolError("abort is only valid after a boundary interrupt")
        return self._finish(True)
