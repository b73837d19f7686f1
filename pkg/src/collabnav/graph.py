"""Stochastic navigation graphs, edge beliefs and belief-conditioned paths.

Nodes carry planar coordinates in meters. An edge is either deterministic or
stochastic; a stochastic edge is untraversable with probability ``rho`` and
its true status is fixed for the duration of a trial.
"""

from __future__ import annotations

import enum
import heapq
import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConflictError, ParseError, ValidationError

Position = tuple[float, float]

# Path costs are compared after rounding so that sums accumulated in a
# different order still tie.
COST_DIGITS = 9


class Status(enum.Enum):
    UNKNOWN = "unknown"
    TRAVERSABLE = "traversable"
    BLOCKED = "blocked"


class Mode(enum.Enum):
    OPTIMISTIC = "optimistic"
    KNOWN_ONLY = "known_only"


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    length: float
    rho: float | None = None

    @property
    def stochastic(self) -> bool:
        return self.rho is not None

    def other(self, node: int) -> int:
        return self.v if node == self.u else self.u

    def touches(self, node: int) -> bool:
        return node == self.u or node == self.v


class Path(NamedTuple):
    nodes: tuple[int, ...]
    cost: float


def cost_key(cost: float) -> float:
    return round(cost, COST_DIGITS)


class NavGraph:
    """Undirected graph with dense integer node ids assigned in input order.

    The constructor checks referential integrity, self-loops, duplicates and
    lengths. Connectivity and the open-interval bound on ``rho`` are checked
    by :func:`graph_violations`, which :func:`load_graph` applies; building a
    graph directly lets tests use degenerate probabilities.
    """

    def __init__(
        self,
        names: Iterable[str],
        positions: Iterable[Position],
        edges: Iterable[Edge],
    ):
        self.names: tuple[str, ...] = tuple(names)
        self.positions: tuple[Position, ...] = tuple(
            (float(x), float(y)) for x, y in positions
        )
        self.edges: tuple[Edge, ...] = tuple(edges)
        if len(self.names) != len(self.positions):
            raise ValidationError("names and positions differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("duplicate node id")
        self.index = {name: i for i, name in enumerate(self.names)}

        problems = []
        seen: dict[frozenset[int], int] = {}
        n = len(self.names)
        for i, e in enumerate(self.edges):
            if not (0 <= e.u < n and 0 <= e.v < n):
                problems.append(f"edge {i} references an unknown node")
                continue
            if e.u == e.v:
                problems.append(f"self-loop at node {self.names[e.u]}")
            pair = frozenset((e.u, e.v))
            if pair in seen:
                problems.append(f"duplicate edge {self.edge_name(i)}")
            seen[pair] = i
            if not e.length > 0:
                problems.append(f"edge {self.edge_name(i)} has non-positive length")
        if problems:
            raise ValidationError(problems)
        self._pair_index = seen

        self.adjacency: tuple[tuple[tuple[int, int], ...], ...] = tuple(
            tuple(
                sorted(
                    (e.other(node), i)
                    for i, e in enumerate(self.edges)
                    if e.touches(node)
                )
            )
            for node in range(n)
        )
        self.stochastic_ids: tuple[int, ...] = tuple(
            i for i, e in enumerate(self.edges) if e.stochastic
        )
        self._slot = {eid: k for k, eid in enumerate(self.stochastic_ids)}
        self._tree_cache: dict = {}

    def __len__(self) -> int:
        return len(self.names)

    def __repr__(self) -> str:
        return (
            f"NavGraph({len(self.names)} nodes, {len(self.edges)} edges, "
            f"{len(self.stochastic_ids)} stochastic)"
        )

    def node(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise KeyError(f"unknown node {name}") from None

    def edge_between(self, u: int, v: int) -> int | None:
        return self._pair_index.get(frozenset((u, v)))

    def edge_name(self, eid: int) -> str:
        e = self.edges[eid]
        return f"{self.names[e.u]}-{self.names[e.v]}"

    def edge_by_name(self, name: str) -> int:
        """Resolve ``"A-B"`` (either orientation) to an edge id."""
        for sep_at in range(1, len(name)):
            if name[sep_at] != "-":
                continue
            a, b = name[:sep_at], name[sep_at + 1 :]
            if a in self.index and b in self.index:
                eid = self.edge_between(self.index[a], self.index[b])
                if eid is not None:
                    return eid
        raise KeyError(f"unknown edge {name}")

    def slot(self, eid: int) -> int:
        """Position of a stochastic edge in ``stochastic_ids``."""
        return self._slot[eid]

    def is_stochastic(self, eid: int) -> bool:
        return eid in self._slot

    def path_length(self, path: Iterable[int]) -> float:
        path = list(path)
        total = 0.0
        for a, b in zip(path, path[1:]):
            eid = self.edge_between(a, b)
            if eid is None:
                raise ValueError(f"no edge between {self.names[a]} and {self.names[b]}")
            total += self.edges[eid].length
        return total

    def path_edges(self, path: Iterable[int]) -> list[int]:
        path = list(path)
        return [self.edge_between(a, b) for a, b in zip(path, path[1:])]

    def distance(self, a: int, b: int) -> float:
        (xa, ya), (xb, yb) = self.positions[a], self.positions[b]
        return math.hypot(xb - xa, yb - ya)


def graph_violations(g: NavGraph) -> list[str]:
    """Invariants not enforced by the constructor: rho range, connectivity."""
    problems = []
    for eid in g.stochastic_ids:
        rho = g.edges[eid].rho
        if not 0.0 < rho < 1.0:
            problems.append(f"edge {g.edge_name(eid)}: rho out of range ({rho})")
    if len(g) > 0:
        seen = {0}
        todo = deque([0])
        while todo:
            node = todo.popleft()
            for nbr, _ in g.adjacency[node]:
                if nbr not in seen:
                    seen.add(nbr)
                    todo.append(nbr)
        missing = [g.names[i] for i in range(len(g)) if i not in seen]
        if missing:
            problems.append(f"graph is disconnected; unreachable from {g.names[0]}: {', '.join(missing)}")
    return problems


def parse_graph(data: dict) -> NavGraph:
    """Build and fully validate a graph from its decoded JSON document."""
    problems = []
    try:
        raw_nodes = data["nodes"]
        raw_edges = data.get("edges", [])
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"graph document needs 'nodes' and 'edges': {exc}") from None

    names, positions = [], []
    for k, rec in enumerate(raw_nodes):
        try:
            name = str(rec["id"])
            pos = (float(rec["x"]), float(rec["y"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"node record {k} is malformed: {exc}") from None
        if name in names:
            problems.append(f"duplicate node {name}")
            continue
        names.append(name)
        positions.append(pos)
    index = {name: i for i, name in enumerate(names)}

    edges = []
    pairs = set()
    for k, rec in enumerate(raw_edges):
        try:
            u_name, v_name = str(rec["u"]), str(rec["v"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"edge record {k} is malformed: {exc}") from None
        label = f"{u_name}-{v_name}"
        bad = [n for n in (u_name, v_name) if n not in index]
        if bad:
            problems.extend(f"edge {label}: unknown node {n}" for n in bad)
            continue
        u, v = index[u_name], index[v_name]
        if u == v:
            problems.append(f"edge {label}: self-loop")
            continue
        if frozenset((u, v)) in pairs:
            problems.append(f"edge {label}: duplicate edge")
            continue
        pairs.add(frozenset((u, v)))
        try:
            if rec.get("length") is None:
                (xu, yu), (xv, yv) = positions[u], positions[v]
                length = math.hypot(xv - xu, yv - yu)
            else:
                length = float(rec["length"])
            rho = None if rec.get("rho") is None else float(rec["rho"])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"edge {label}: bad numeric field: {exc}") from None
        if not length > 0:
            problems.append(f"edge {label}: non-positive length {length}")
            continue
        if rho is not None and not 0.0 < rho < 1.0:
            problems.append(f"edge {label}: rho out of range ({rho})")
            continue
        edges.append(Edge(u, v, length, rho))

    if problems:
        raise ValidationError(problems)
    g = NavGraph(names, positions, edges)
    problems = graph_violations(g)
    if problems:
        raise ValidationError(problems)
    return g


def load_graph(text: str) -> NavGraph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"graph file is not valid JSON: {exc}") from None
    return parse_graph(data)


def dump_graph(g: NavGraph) -> str:
    doc = {
        "nodes": [
            {"id": name, "x": x, "y": y} for name, (x, y) in zip(g.names, g.positions)
        ],
        "edges": [],
    }
    for e in g.edges:
        rec = {"u": g.names[e.u], "v": g.names[e.v], "length": e.length}
        if e.rho is not None:
            rec["rho"] = e.rho
        doc["edges"].append(rec)
    return json.dumps(doc, indent=2)


class EdgeBelief:
    """Per-stochastic-edge knowledge. Immutable; updates return new beliefs."""

    __slots__ = ("edges", "status", "_hash")

    def __init__(self, edges: tuple[int, ...], status: tuple[Status, ...]):
        if len(edges) != len(status):
            raise ValueError("edges and status differ in length")
        self.edges = edges
        self.status = status
        self._hash = hash(status)

    @classmethod
    def initial(cls, g: NavGraph) -> EdgeBelief:
        return cls(g.stochastic_ids, (Status.UNKNOWN,) * len(g.stochastic_ids))

    @classmethod
    def from_mapping(cls, g: NavGraph, known: dict[int, Status]) -> EdgeBelief:
        status = tuple(known.get(eid, Status.UNKNOWN) for eid in g.stochastic_ids)
        return cls(g.stochastic_ids, status)

    def __getitem__(self, eid: int) -> Status:
        return self.status[self.edges.index(eid)]

    def __contains__(self, eid: int) -> bool:
        return eid in self.edges

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeBelief) and self.status == other.status and self.edges == other.edges

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{e}:{s.value}" for e, s in zip(self.edges, self.status))
        return f"EdgeBelief({body})"

    def items(self):
        return zip(self.edges, self.status)

    def unknown(self) -> tuple[int, ...]:
        return tuple(e for e, s in zip(self.edges, self.status) if s is Status.UNKNOWN)

    def with_status(self, eid: int, status: Status) -> EdgeBelief:
        k = self.edges.index(eid)
        new = list(self.status)
        new[k] = status
        return EdgeBelief(self.edges, tuple(new))


def edge_admissible(g: NavGraph, b: EdgeBelief, eid: int, mode: Mode) -> bool:
    e = g.edges[eid]
    if e.rho is None:
        return True
    status = b.status[g.slot(eid)]
    if status is Status.TRAVERSABLE:
        return True
    if status is Status.UNKNOWN:
        return mode is Mode.OPTIMISTIC
    return False


def _path_tree(g: NavGraph, b: EdgeBelief, mode: Mode, source: int) -> dict[int, Path]:
    """Single-source best paths under (cost, edge count, node sequence) order."""
    key = (b.status, mode, source)
    cached = g._tree_cache.get(key)
    if cached is not None:
        return cached

    admissible = [edge_admissible(g, b, eid, mode) for eid in range(len(g.edges))]
    best: dict[int, Path] = {}
    heap = [(0.0, 0, (source,), 0.0)]
    while heap:
        _, _, nodes, cost = heapq.heappop(heap)
        here = nodes[-1]
        if here in best:
            continue
        best[here] = Path(nodes, cost)
        for nbr, eid in g.adjacency[here]:
            if nbr in best or not admissible[eid]:
                continue
            c = cost + g.edges[eid].length
            heapq.heappush(heap, (cost_key(c), len(nodes), nodes + (nbr,), c))

    if len(g._tree_cache) > 200_000:
        g._tree_cache.clear()
    g._tree_cache[key] = best
    return best


def shortest_path(
    g: NavGraph, b: EdgeBelief, mode: Mode, source: int, target: int
) -> Path | None:
    """Cheapest admissible path, or ``None`` when the target is unreachable.

    ``KNOWN_ONLY`` admits deterministic and known-traversable edges;
    ``OPTIMISTIC`` also admits unknown edges at face value. Ties go to fewer
    edges, then to the lexicographically smallest node sequence.
    """
    return _path_tree(g, b, mode, source).get(target)


def path_cost(g: NavGraph, b: EdgeBelief, mode: Mode, source: int, target: int) -> float:
    p = shortest_path(g, b, mode, source, target)
    return math.inf if p is None else p.cost


@dataclass(frozen=True)
class WorldSample:
    """Ground truth for every stochastic edge, aligned with ``g.stochastic_ids``."""

    edges: tuple[int, ...]
    truth: tuple[Status, ...]
    seed: int | None = None

    def __getitem__(self, eid: int) -> Status:
        return self.truth[self.edges.index(eid)]

    def consistent_with(self, b: EdgeBelief) -> bool:
        return all(
            s is Status.UNKNOWN or s is t for s, t in zip(b.status, self.truth)
        )

    def items(self):
        return zip(self.edges, self.truth)


def sample_world(g: NavGraph, b: EdgeBelief, seed: int) -> WorldSample:
    """Draw each unknown edge Blocked with probability ``rho``; copy known edges.

    One uniform draw is consumed per stochastic edge regardless of its belief
    status, so the same seed yields the same realization for edges that are
    still unknown after others have been observed.
    """
    draws = np.random.default_rng(seed).random(len(g.stochastic_ids))
    truth = []
    for k, (eid, status) in enumerate(zip(b.edges, b.status)):
        if status is Status.UNKNOWN:
            blocked = draws[k] < g.edges[eid].rho
            truth.append(Status.BLOCKED if blocked else Status.TRAVERSABLE)
        else:
            truth.append(status)
    return WorldSample(b.edges, tuple(truth), seed)


def world_from_mapping(g: NavGraph, truth: dict[int, Status]) -> WorldSample:
    return WorldSample(g.stochastic_ids, tuple(truth[eid] for eid in g.stochastic_ids))


def enumerate_worlds(g: NavGraph, b: EdgeBelief) -> list[tuple[WorldSample, float]]:
    """All realizations of the unknown edges with their probabilities."""
    unknown = b.unknown()
    out = []
    for mask in range(2 ** len(unknown)):
        truth = dict(b.items())
        prob = 1.0
        for k, eid in enumerate(unknown):
            rho = g.edges[eid].rho
            if mask >> k & 1:
                truth[eid] = Status.BLOCKED
                prob *= rho
            else:
                truth[eid] = Status.TRAVERSABLE
                prob *= 1.0 - rho
        out.append((WorldSample(b.edges, tuple(truth[e] for e in b.edges)), prob))
    return out


def apply_observation(b: EdgeBelief, eid: int, observed: Status) -> EdgeBelief:
    """Record an observation; idempotent, and contradictions raise."""
    if observed is Status.UNKNOWN:
        raise ValueError("an observation must be TRAVERSABLE or BLOCKED")
    current = b[eid]
    if current is Status.UNKNOWN:
        return b.with_status(eid, observed)
    if current is observed:
        return b
    raise ConflictError(eid, current, observed)
