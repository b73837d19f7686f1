"""Small builders and brute-force references shared by the tests."""

from __future__ import annotations

import itertools
import math

from collabnav.graph import Edge, EdgeBelief, Mode, NavGraph, Status, cost_key


def line_graph(spec, positions=None):
    """``spec`` is a list of (u, v, length[, rho]) with single-letter names."""
    names = sorted({n for rec in spec for n in rec[:2]})
    idx = {n: i for i, n in enumerate(names)}
    positions = positions or {n: (float(i), 0.0) for i, n in enumerate(names)}
    edges = [Edge(idx[r[0]], idx[r[1]], float(r[2]), r[3] if len(r) > 3 else None) for r in spec]
    return NavGraph(names, [positions[n] for n in names], edges)


def brute_force_path(g: NavGraph, b: EdgeBelief, mode: Mode, src: int, dst: int):
    """Best simple path by exhaustive DFS, same ordering as the library."""
    def ok(eid):
        e = g.edges[eid]
        if not e.stochastic:
            return True
        s = b[eid]
        return s is Status.TRAVERSABLE or (mode is Mode.OPTIMISTIC and s is Status.UNKNOWN)

    best = None
    stack = [(src, (src,), 0.0)]
    while stack:
        node, path, cost = stack.pop()
        if node == dst:
            key = (cost_key(cost), len(path), path)
            if best is None or key < best[0]:
                best = (key, path, cost)
            continue
        for nbr, eid in g.adjacency[node]:
            if nbr not in path and ok(eid):
                stack.append((nbr, path + (nbr,), cost + g.edges[eid].length))
    if best is None:
        return None
    return best[1], best[2]


def random_belief(g: NavGraph, choices):
    """Belief with the i-th stochastic edge set to ``choices[i]``."""
    return EdgeBelief(g.stochastic_ids, tuple(choices[: len(g.stochastic_ids)]))


def all_beliefs(g: NavGraph):
    for combo in itertools.product(list(Status), repeat=len(g.stochastic_ids)):
        yield EdgeBelief(g.stochastic_ids, combo)


def close(a: float, b: float, tol: float = 1e-9) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol
