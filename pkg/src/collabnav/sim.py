"""Discrete-event trial runner.

A base station plans for the team and talks to the agents over reliable
FIFO channels with a constant delay. When an agent finishes its
macro-action it reports; on delivery of that report the base station
interrupts every agent still executing. Once every agent has reported, the
observations are merged and the whole team is replanned.

Agents execute primitives either on the graph (edge length over speed,
truthful sensing) or in a rasterized obstacle scene (grid planner, waypoint
follower, detour-ratio sensing).
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

from .errors import ConfigError, ConflictError, LimitExceeded, PlanningStuck
from .executor import (
    DEFAULT_DELTA,
    AgentExec,
    Continue,
    MacroDone,
    MacroResult,
    NavFailure,
    NavigateEdge,
    ObserveEdge,
    Retry,
    Success,
    WaitFor,
)
from .graph import EdgeBelief, NavGraph, Status, WorldSample, enumerate_worlds, sample_world
from .macro import AgentSpec, MacroAction, describe
from .planner import COLLABORATIVE, INDEPENDENT, AgentState, PlannerParams, TeamState, plan_independent, plan_joint
from . import world as pw

GRAPH = "graph"
CONTINUOUS = "continuous"
HALT = "halt"
TRUST_LATEST = "trust_latest"
DEFAULT_STEP_BUDGET = 1_000_000

METRICS_HEADER = [
    "trial", "planner", "fidelity", "world_seed", "agent",
    "graph_distance_m", "wait_time_s", "reached_goal", "makespan_s", "outcome",
]


@dataclass(frozen=True)
class TrialConfig:
    graph: NavGraph
    agents: Sequence[AgentSpec]
    planner: PlannerParams = PlannerParams()
    fidelity: str = GRAPH
    scene: pw.Scene | None = None
    message_delay: float = 0.0
    world_seed: int = 0
    observation_conflict_policy: str = HALT
    truth: WorldSample | None = None  # overrides sampling when given
    dt: float = pw.DEFAULT_DT
    resolution: float = pw.DEFAULT_RESOLUTION
    inflation: float = pw.DEFAULT_INFLATION
    goal_radius: float = pw.GOAL_RADIUS
    lookahead: float = pw.LOOKAHEAD
    detour_threshold: float = pw.DETOUR_THRESHOLD
    delta: float = DEFAULT_DELTA
    step_budget: int = DEFAULT_STEP_BUDGET

    def violations(self) -> list[str]:
        out = []
        if self.fidelity not in (GRAPH, CONTINUOUS):
            out.append(f"unknown fidelity {self.fidelity!r}")
        if self.fidelity == CONTINUOUS and self.scene is None:
            out.append("continuous fidelity needs a scene (--scene)")
        if self.planner.mode not in (COLLABORATIVE, INDEPENDENT):
            out.append(f"unknown planner mode {self.planner.mode!r}")
        if self.observation_conflict_policy not in (HALT, TRUST_LATEST):
            out.append(f"unknown conflict policy {self.observation_conflict_policy!r}")
        if not self.message_delay >= 0:
            out.append("message delay must be non-negative")
        if not self.agents:
            out.append("at least one agent is required")
        if len({a.id for a in self.agents}) != len(self.agents):
            out.append("agent ids must be unique")
        n = len(self.graph)
        for a in self.agents:
            if not (0 <= a.start < n and 0 <= a.goal < n):
                out.append(f"agent {a.id}: start or goal is not a graph node")
        if self.truth is not None and self.truth.edges != self.graph.stochastic_ids:
            out.append("truth override does not cover the stochastic edges")
        for name in ("dt", "resolution", "goal_radius", "lookahead", "delta"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be positive")
        return out


@dataclass(frozen=True)
class MacroAssignment:
    agent: int
    macro: MacroAction
    belief: EdgeBelief
    assignment: int


@dataclass(frozen=True)
class MacroReport:
    agent: int
    result: MacroResult
    assignment: int


@dataclass(frozen=True)
class Interrupt:
    agent: int
    assignment: int


Payload = Union[MacroAssignment, MacroReport, Interrupt]


@dataclass(frozen=True)
class Message:
    payload: Payload
    send_time: float
    deliver_time: float


@dataclass
class AgentOutcome:
    graph_distance: float = 0.0
    wait_time: float = 0.0
    final_node: str = ""
    reached_goal: bool = False
    arrival: float | None = None


@dataclass
class TrialResult:
    makespan: float
    agents: dict[str, AgentOutcome]
    events: list[dict]
    outcome: str
    reason: str = ""
    planner: str = COLLABORATIVE
    fidelity: str = GRAPH
    world_seed: int = 0
    trajectories: list[tuple[float, str, float, float]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.outcome == "Complete"

    @property
    def outcome_label(self) -> str:
        return "Complete" if self.complete else f"Failed:{self.reason}"

    def assignments(self) -> list[tuple[str, dict]]:
        """Every (agent, macro description) the base station sent, in order."""
        return [(e["agent"], e["detail"]["macro"]) for e in self.events if e["kind"] == "assign"]


class _Failed(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class _Trial:
    def __init__(self, cfg: TrialConfig):
        self.cfg = cfg
        self.g = cfg.graph
        self.agents = list(cfg.agents)
        self.ids = [a.id for a in self.agents]
        self.continuous = cfg.fidelity == CONTINUOUS
        initial = EdgeBelief.initial(self.g)
        self.world = cfg.truth if cfg.truth is not None else sample_world(self.g, initial, cfg.world_seed)
        self.grid = None
        if self.continuous:
            self.grid = pw.rasterize(cfg.scene, self.world, self.g, cfg.resolution, cfg.inflation)

        n = len(self.agents)
        self.shared = initial
        self.beliefs = [initial] * n
        self.execs = [AgentExec(a, self.g, a.start, delta=cfg.delta) for a in self.agents]
        self.outcomes = [AgentOutcome() for _ in range(n)]
        self.done = [a.start == a.goal for a in self.agents]
        for i, d in enumerate(self.done):
            if d:
                self.outcomes[i].arrival = 0.0

        self.now = 0.0
        self.seq = 0
        self.heap: list = []
        self.events: list[dict] = []
        self.trajectories: list[tuple[float, str, float, float]] = []
        self.steps = 0

        # Base-station bookkeeping for the current epoch.
        self.outstanding: set[int] = set()
        self.interrupted: set[int] = set()
        self.reports: list[MacroReport] = []
        self.assignment_no = [0] * n
        # Agent-side bookkeeping for the in-flight primitive.
        self.token = [0] * n
        self.prim_start = [0.0] * n
        self.pending: list[tuple | None] = [None] * n
        self.macro_done_at = [0.0] * n

    # -- infrastructure -------------------------------------------------
    def log(self, kind: str, agent: int | None, detail: dict) -> None:
        self.events.append({
            "t": self.now,
            "seq": len(self.events),
            "kind": kind,
            "agent": None if agent is None else self.ids[agent],
            "detail": detail,
        })

    def schedule(self, t: float, handler, *args) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, handler, args))

    def send(self, payload: Payload) -> Message:
        msg = Message(payload, self.now, self.now + self.cfg.message_delay)
        self.schedule(msg.deliver_time, self._deliver, msg)
        return msg

    def _deliver(self, msg: Message) -> None:
        p = msg.payload
        if isinstance(p, MacroAssignment):
            self._agent_assign(p)
        elif isinstance(p, MacroReport):
            self._station_report(p)
        else:
            self._agent_interrupt(p)

    # -- base station ---------------------------------------------------
    def _station_report(self, rep: MacroReport) -> None:
        i = rep.agent
        r = rep.result
        self.log("report", i, {
            "node": self.g.names[r.final_node],
            "success": r.success,
            "interrupted": r.interrupted,
            "observations": {self.g.edge_name(e): s.value for e, s in r.observations},
        })
        self.outstanding.discard(i)
        self.reports.append(rep)
        if not r.success:
            raise _Failed(f"NavigationFailure: agent {self.ids[i]} could not reach any goal variant")
        for j in sorted(self.outstanding - self.interrupted):
            self.interrupted.add(j)
            self.send(Interrupt(j, self.assignment_no[j]))
        if not self.outstanding:
            self._end_epoch()

    def _merge(self, b: EdgeBelief, observations) -> EdgeBelief:
        for eid, status in observations:
            known = b[eid]
            if known is Status.UNKNOWN or known is status:
                b = b.with_status(eid, status)
            elif self.cfg.observation_conflict_policy == HALT:
                err = ConflictError(eid, known, status)
                raise _Failed(f"ObservationConflict: edge {self.g.edge_name(eid)} known "
                              f"{err.known.value}, observed {err.observed.value}")
            else:
                b = b.with_status(eid, status)
        return b

    def _end_epoch(self) -> None:
        for rep in sorted(self.reports, key=lambda r: r.agent):
            i, r = rep.agent, rep.result
            if self.cfg.planner.mode == COLLABORATIVE:
                self.shared = self._merge(self.shared, r.observations)
            else:
                self.beliefs[i] = self._merge(self.beliefs[i], r.observations)
            if r.final_node == self.agents[i].goal:
                self.done[i] = True
                self.outcomes[i].arrival = self.macro_done_at[i]
        self.reports = []
        self._replan()

    def _replan(self) -> None:
        active = [i for i, d in enumerate(self.done) if not d]
        if not active:
            return
        p = self.cfg.planner
        try:
            if p.mode == COLLABORATIVE:
                s = TeamState(
                    tuple(AgentState(a, ex.node, self.now if not d else (self.outcomes[i].arrival or 0.0), d)
                          for i, (a, ex, d) in enumerate(zip(self.agents, self.execs, self.done))),
                    self.shared,
                )
                joint = plan_joint(self.g, s, p)
                belief_of = {i: self.shared for i in active}
                snapshot = self.shared
            else:
                joint = {}
                for i in active:
                    solo = TeamState((AgentState(self.agents[i], self.execs[i].node, 0.0, False),),
                                     self.beliefs[i])
                    joint.update(plan_independent(self.g, solo, p))
                belief_of = {i: self.beliefs[i] for i in active}
                snapshot = None
        except PlanningStuck as exc:
            raise _Failed(f"PlanningStuck: {exc}") from None
        except LimitExceeded as exc:
            raise _Failed(f"PlanningLimit: {exc}") from None

        detail = {"active": [self.ids[i] for i in active]}
        if snapshot is not None:
            detail["belief"] = {self.g.edge_name(e): s.value for e, s in snapshot.items()}
        else:
            detail["beliefs"] = {
                self.ids[i]: {self.g.edge_name(e): s.value for e, s in self.beliefs[i].items()}
                for i in active
            }
        self.log("replan", None, detail)
        self.outstanding = set(active)
        self.interrupted = set()
        for i in active:
            self.assignment_no[i] += 1
            m = joint[self.ids[i]]
            self.log("assign", i, {"macro": describe(self.g, m), "assignment": self.assignment_no[i]})
            self.send(MacroAssignment(i, m, belief_of[i], self.assignment_no[i]))

    # -- agents -----------------------------------------------------------
    def _agent_assign(self, msg: MacroAssignment) -> None:
        ex = self.execs[msg.agent]
        ex.assign(msg.macro, msg.belief)
        self._run_from(msg.agent, None)

    def _agent_interrupt(self, msg: Interrupt) -> None:
        i = msg.agent
        ex = self.execs[i]
        if not ex.busy or self.assignment_no[i] != msg.assignment or ex.interrupt_latched:
            # The macro this interrupt targets already ended; discard it.
            self.log("interrupt", i, {"stale": True})
            return
        cur = ex.current
        at_boundary = (
            not isinstance(cur, WaitFor)
            and ex.attempt == 0
            and self.prim_start[i] == self.now
        )
        cut = ex.on_interrupt(at_boundary).terminate_after
        self.log("interrupt", i, {"stale": False, "at_boundary": at_boundary,
                                  "cut": cut, "cursor": ex.cursor})
        if isinstance(cur, WaitFor):
            end = self.now
            if self.continuous:
                dt = self.cfg.dt
                end = self.prim_start[i] + math.ceil((self.now - self.prim_start[i]) / dt - 1e-9) * dt
            self.token[i] += 1
            waited = end - self.prim_start[i]
            if end == self.now:
                self._primitive_end(i, self.token[i], Success(waited=waited))
            else:
                self.schedule(end, self._primitive_end, i, self.token[i], Success(waited=waited))
        elif cut < ex.cursor:
            self.token[i] += 1
            self.log("primitive_end", i, {"aborted": True})
            self._report(i, ex.abort())

    def _report(self, i: int, done: MacroDone) -> None:
        r = done.result
        out = self.outcomes[i]
        out.graph_distance += r.distance_traveled
        out.wait_time += r.wait_time
        self.macro_done_at[i] = self.now
        self.send(MacroReport(i, r, self.assignment_no[i]))

    def _primitive_end(self, i: int, token: int, outcome) -> None:
        if token != self.token[i]:
            return
        self._run_from(i, outcome)

    def _run_from(self, i: int, outcome) -> None:
        """Feed ``outcome`` to the executor and start primitives until one
        takes time or the macro ends. ``None`` starts the current primitive."""
        ex = self.execs[i]
        while True:
            if outcome is not None:
                self._log_end(i, outcome)
                step = ex.on_primitive_result(outcome)
                if isinstance(step, MacroDone):
                    self._report(i, step)
                    return
            duration, outcome = self._start(i)
            if duration > 0:
                self.token[i] += 1
                self.schedule(self.now + duration, self._primitive_end, i, self.token[i], outcome)
                return

    def _log_end(self, i: int, outcome) -> None:
        detail = {"ok": isinstance(outcome, Success)}
        if isinstance(outcome, Success) and outcome.observation is not None:
            detail["observation"] = outcome.observation.value
        self.log("primitive_end", i, detail)

    def _start(self, i: int) -> tuple[float, Success | NavFailure]:
        ex = self.execs[i]
        a = self.agents[i]
        p = ex.current
        self.prim_start[i] = self.now
        g = self.g
        if isinstance(p, NavigateEdge):
            self.log("primitive_start", i, {"type": "navigate", "from": g.names[p.src],
                                            "to": g.names[p.dst], "attempt": ex.attempt})
            if not self.continuous:
                length = g.edges[g.edge_between(p.src, p.dst)].length
                return length / a.speed, Success(distance=length)
            run = pw.navigate_action(self.grid, ex.pose, ex.nav_goal, a.speed, self.cfg.dt, self.cfg.goal_radius)
            for k, (x, y) in enumerate(run.poses, start=1):
                self.trajectories.append((self.now + k * self.cfg.dt, a.id, x, y))
            if run.poses:
                ex.pose = run.poses[-1]
            duration = run.duration(self.cfg.dt)
            if run.arrived:
                return duration, Success(distance=run.distance)
            return duration, NavFailure(distance=run.distance)

        if isinstance(p, ObserveEdge):
            e = g.edges[p.edge]
            self.log("primitive_start", i, {"type": "observe", "edge": g.edge_name(p.edge),
                                            "from": g.names[p.node]})
            if self.continuous:
                status = pw.observe_edge(self.grid, ex.pose, g.positions[p.node],
                                         g.positions[e.other(p.node)],
                                         self.cfg.lookahead, self.cfg.detour_threshold)
            else:
                status = self.world[p.edge]
            self.log("observe", i, {"edge": g.edge_name(p.edge), "from": g.names[p.node],
                                    "status": status.value, "truth": self.world[p.edge].value})
            return a.sense_duration, Success(observation=status)

        self.log("primitive_start", i, {"type": "wait", "duration": p.duration})
        duration = p.duration
        if self.continuous:
            duration = pw.wait_ticks(p.duration, self.cfg.dt) * self.cfg.dt
        return duration, Success(waited=duration)

    # -- main loop --------------------------------------------------------
    def run(self) -> TrialResult:
        reason = ""
        try:
            if self.continuous:
                for a in self.agents:
                    x, y = self.g.positions[a.start]
                    self.trajectories.append((0.0, a.id, x, y))
            self._replan()
            while self.heap:
                t, _, handler, args = heapq.heappop(self.heap)
                self.now = t
                self.steps += 1
                if self.steps > self.cfg.step_budget:
                    raise _Failed(f"StepBudget: more than {self.cfg.step_budget} events")
                handler(*args)
        except _Failed as f:
            reason = f.reason

        n = len(self.agents)
        for i in range(n):
            out = self.outcomes[i]
            out.final_node = self.g.names[self.execs[i].node]
            out.reached_goal = self.done[i]
        if not reason and not all(self.done):
            reason = "Stalled: event queue drained with agents short of their goals"
        if reason:
            makespan = self.now
            outcome = "Failed"
        else:
            makespan = max(o.arrival for o in self.outcomes)
            outcome = "Complete"
        return TrialResult(
            makespan=makespan,
            agents={a.id: o for a, o in zip(self.agents, self.outcomes)},
            events=self.events,
            outcome=outcome,
            reason=reason,
            planner=self.cfg.planner.mode,
            fidelity=self.cfg.fidelity,
            world_seed=self.cfg.world_seed,
            trajectories=self.trajectories,
        )


def run_trial(cfg: TrialConfig) -> TrialResult:
    """Run one trial to completion or failure.

    Invalid configurations raise :class:`ConfigError`; every runtime problem
    (planning stuck, navigation failure, observation conflict, step budget)
    becomes a ``Failed`` result.
    """
    problems = cfg.violations()
    if problems:
        raise ConfigError("; ".join(problems))
    return _Trial(cfg).run()


def exact_policy_makespan(cfg: TrialConfig, planner_mode: str | None = None, max_unknown: int = 2) -> float:
    """Expected closed-loop makespan, exactly, by running every world."""
    if cfg.fidelity != GRAPH:
        raise ConfigError("exact evaluation needs graph fidelity")
    initial = EdgeBelief.initial(cfg.graph)
    k = len(initial.unknown())
    if k > max_unknown:
        raise LimitExceeded(f"{k} unknown edges exceeds the limit of {max_unknown}")
    if planner_mode is not None:
        cfg = replace(cfg, planner=replace(cfg.planner, mode=planner_mode))
    total = 0.0
    for w, prob in enumerate_worlds(cfg.graph, initial):
        r = run_trial(replace(cfg, truth=w))
        value = r.makespan if r.complete else math.inf
        if prob > 0:
            total += prob * value
    return total


def _num(x: float) -> str:
    return f"{x:.6f}"


def metrics_rows(result: TrialResult, trial: str) -> list[list[str]]:
    rows = []
    for aid, o in result.agents.items():
        rows.append([
            trial, result.planner, result.fidelity, str(result.world_seed), aid,
            _num(o.graph_distance), _num(o.wait_time), str(o.reached_goal).lower(),
            _num(o.arrival if o.arrival is not None else result.makespan), result.outcome_label,
        ])
    rows.append([
        trial, result.planner, result.fidelity, str(result.world_seed), "TEAM",
        _num(sum(o.graph_distance for o in result.agents.values())),
        _num(sum(o.wait_time for o in result.agents.values())),
        str(all(o.reached_goal for o in result.agents.values())).lower(),
        _num(result.makespan), result.outcome_label,
    ])
    return rows


def metrics_csv(result: TrialResult, trial: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    w.writerows(metrics_rows(result, trial))
    return buf.getvalue()


def events_ndjson(result: TrialResult) -> str:
    return "".join(json.dumps(e, sort_keys=False, separators=(",", ":")) + "\n" for e in result.events)


def trajectories_csv(result: TrialResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "agent", "x", "y"])
    for t, aid, x, y in result.trajectories:
        w.writerow([_num(t), aid, _num(x), _num(y)])
    return buf.getvalue()


def write_outputs(result: TrialResult, directory, trial: str = "0") -> list[str]:
    """Write metrics, events and (continuous runs) trajectories; return paths."""
    files = {f"metrics_{trial}.csv": metrics_csv(result, trial),
             f"events_{trial}.ndjson": events_ndjson(result)}
    if result.fidelity == CONTINUOUS:
        files[f"trajectories_{trial}.csv"] = trajectories_csv(result)
    written = []
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {directory}: {exc}") from exc
    for name, text in files.items():
        path = os.path.join(directory, name)
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return written
