"""Continuous-fidelity world: obstacle scenes, occupancy grids and the
navigate / observe / wait primitives that run on them.

The grid planner is an 8-connected A* (no corner cutting) and the follower
moves along its waypoints at constant speed, one ``speed * dt`` step per tick.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import ndimage

from .errors import ParseError, SceneError
from .graph import NavGraph, Position, Status, WorldSample

GOAL_RADIUS = 3.0
LOOKAHEAD = 20.0
DETOUR_THRESHOLD = 1.2
DEFAULT_RESOLUTION = 0.25
DEFAULT_INFLATION = 0.5
DEFAULT_DT = 0.1
WALL_ALONG = 0.5
WALL_WIDTH = 6.0
WALL_THICKNESS = 0.5
TIMEOUT_FACTOR = 3.0

# Row-major neighbour order; (drow, dcol).
_NEIGHBOURS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, p: Position) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class WallSpec:
    along: float = WALL_ALONG
    width: float = WALL_WIDTH
    from_v: bool = False  # measure ``along`` from the edge's second endpoint

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("wall width must be positive")
        if not 0.0 <= self.along <= 1.0:
            raise ValueError("wall position must be a fraction in [0, 1]")


@dataclass
class Scene:
    bounds: Rect
    obstacles: list = field(default_factory=list)
    blockages: dict[int, WallSpec] = field(default_factory=dict)

    def wall_for(self, eid: int) -> WallSpec:
        return self.blockages.get(eid, WallSpec())


def parse_scene(data: dict, g: NavGraph) -> Scene:
    try:
        b = data["bounds"]
        if isinstance(b, dict):
            bounds = Rect(float(b["xmin"]), float(b["ymin"]), float(b["xmax"]), float(b["ymax"]))
        else:
            bounds = Rect(*map(float, b))
        obstacles = []
        for rec in data.get("obstacles", []):
            if "rect" in rec:
                x0, y0, x1, y1 = map(float, rec["rect"])
                obstacles.append(Rect(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)))
            elif "circle" in rec:
                obstacles.append(Circle(*map(float, rec["circle"])))
            else:
                raise ParseError(f"unknown obstacle record {rec!r}")
        blockages = {}
        for name, rec in (data.get("blockages") or {}).items():
            eid = g.edge_by_name(name)
            first = name.split("-")[0]
            from_v = g.names[g.edges[eid].v] == first and g.names[g.edges[eid].u] != first
            blockages[eid] = WallSpec(
                float(rec.get("along", WALL_ALONG)), float(rec.get("width", WALL_WIDTH)), from_v
            )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"scene document is malformed: {exc}") from None
    return Scene(bounds, obstacles, blockages)


def load_scene(text: str, g: NavGraph) -> Scene:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scene file is not valid JSON: {exc}") from None
    return parse_scene(data, g)


@dataclass
class OccupancyGrid:
    resolution: float
    origin: Position
    cells: np.ndarray  # [row, col] = [y, x]; True = occupied
    inflation: float = DEFAULT_INFLATION

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def cell_of(self, p: Position) -> tuple[int, int]:
        col = int(math.floor((p[0] - self.origin[0]) / self.resolution))
        row = int(math.floor((p[1] - self.origin[1]) / self.resolution))
        return row, col

    def center(self, cell: tuple[int, int]) -> Position:
        row, col = cell
        return (
            self.origin[0] + (col + 0.5) * self.resolution,
            self.origin[1] + (row + 0.5) * self.resolution,
        )

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        rows, cols = self.cells.shape
        return 0 <= cell[0] < rows and 0 <= cell[1] < cols

    def occupied(self, p: Position) -> bool:
        cell = self.cell_of(p)
        return not self.in_bounds(cell) or bool(self.cells[cell])

    @classmethod
    def empty(cls, bounds: Rect, resolution: float = DEFAULT_RESOLUTION) -> OccupancyGrid:
        cols = int(math.ceil((bounds.xmax - bounds.xmin) / resolution - 1e-9))
        rows = int(math.ceil((bounds.ymax - bounds.ymin) / resolution - 1e-9))
        return cls(resolution, (bounds.xmin, bounds.ymin), np.zeros((rows, cols), dtype=bool), 0.0)


def wall_segment(g: NavGraph, eid: int, spec: WallSpec) -> tuple[Position, Position]:
    """Endpoints of the wall that blocks edge ``eid``."""
    e = g.edges[eid]
    a, b = np.array(g.positions[e.u]), np.array(g.positions[e.v])
    if spec.from_v:
        a, b = b, a
    d = b - a
    d = d / np.linalg.norm(d)
    normal = np.array([-d[1], d[0]])
    mid = a + spec.along * (b - a)
    half = 0.5 * spec.width * normal
    return tuple(mid - half), tuple(mid + half)


def _segment_distance(px: np.ndarray, py: np.ndarray, a: Position, b: Position) -> np.ndarray:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _disk(radius_cells: int) -> np.ndarray:
    k = radius_cells
    yy, xx = np.mgrid[-k : k + 1, -k : k + 1]
    return xx * xx + yy * yy <= k * k


def rasterize_obstacles(
    scene: Scene,
    g: NavGraph | None = None,
    world: WorldSample | None = None,
    resolution: float = DEFAULT_RESOLUTION,
) -> OccupancyGrid:
    """Occupancy before inflation. A cell is occupied if it meets an obstacle."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    grid = OccupancyGrid.empty(scene.bounds, resolution)
    rows, cols = grid.shape
    x0 = grid.origin[0] + np.arange(cols) * resolution
    y0 = grid.origin[1] + np.arange(rows) * resolution
    cx0, cy0 = np.meshgrid(x0, y0)
    cx1, cy1 = cx0 + resolution, cy0 + resolution
    occ = grid.cells

    for ob in scene.obstacles:
        if isinstance(ob, Rect):
            occ |= (cx1 > ob.xmin) & (cx0 < ob.xmax) & (cy1 > ob.ymin) & (cy0 < ob.ymax)
        else:
            nx = np.clip(ob.cx, cx0, cx1)
            ny = np.clip(ob.cy, cy0, cy1)
            occ |= np.hypot(nx - ob.cx, ny - ob.cy) < ob.r

    if g is not None and world is not None:
        centers_x, centers_y = cx0 + 0.5 * resolution, cy0 + 0.5 * resolution
        reach = 0.5 * WALL_THICKNESS + resolution * math.sqrt(0.5)
        for eid, status in world.items():
            if status is Status.BLOCKED:
                a, b = wall_segment(g, eid, scene.wall_for(eid))
                occ |= _segment_distance(centers_x, centers_y, a, b) <= reach
    return grid


def inflate(grid: OccupancyGrid, inflation: float) -> OccupancyGrid:
    k = int(math.ceil(inflation / grid.resolution - 1e-9))
    cells = grid.cells
    if k > 0:
        cells = ndimage.binary_dilation(cells, structure=_disk(k))
    return OccupancyGrid(grid.resolution, grid.origin, cells, inflation)


def scene_violations(grid: OccupancyGrid, g: NavGraph, bounds: Rect | None = None) -> list[str]:
    problems = []
    for name, pos in zip(g.names, g.positions):
        if bounds is not None and not bounds.contains(pos):
            problems.append(f"node {name} lies outside the scene bounds")
        elif grid.occupied(pos):
            problems.append(f"node {name} at ({pos[0]:g}, {pos[1]:g}) lies in an inflated obstacle")
    return problems


def rasterize(
    scene: Scene,
    world: WorldSample | None,
    g: NavGraph,
    resolution: float = DEFAULT_RESOLUTION,
    inflation: float = DEFAULT_INFLATION,
) -> OccupancyGrid:
    """Inflated occupancy grid with walls across every blocked stochastic edge."""
    grid = inflate(rasterize_obstacles(scene, g, world, resolution), inflation)
    problems = scene_violations(grid, g, scene.bounds)
    if problems:
        raise SceneError(problems)
    return grid


@dataclass(frozen=True)
class GridPath:
    waypoints: list[Position]
    cost: float
    cells: list[tuple[int, int]]


def plan_grid_path(
    grid: OccupancyGrid, start: Position, goal: Position, radius: float
) -> GridPath | None:
    """Shortest 8-connected path to any free cell whose center is within
    ``radius`` of ``goal``; ``None`` when no such cell is reachable.

    Diagonal steps cost ``sqrt(2) * resolution`` and may not cut the corner of
    an occupied cell.
    """
    s = grid.cell_of(start)
    if not grid.in_bounds(s) or grid.cells[s]:
        raise ValueError(f"start {start} is outside the grid or occupied")
    res = grid.resolution
    cells = grid.cells
    rows, cols = cells.shape
    ox, oy = grid.origin
    gx, gy = goal
    diag = math.sqrt(2.0) * res

    def dist_to_goal(r: int, c: int) -> float:
        return math.hypot(ox + (c + 0.5) * res - gx, oy + (r + 0.5) * res - gy)

    def h(r: int, c: int) -> float:
        return max(0.0, dist_to_goal(r, c) - radius)

    best = {s: 0.0}
    parent = {s: None}
    closed = set()
    counter = 0
    heap = [(h(*s), counter, s)]
    found = None
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        closed.add(cur)
        r, c = cur
        if dist_to_goal(r, c) <= radius:
            found = cur
            break
        base = best[cur]
        for dr, dc in _NEIGHBOURS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols) or cells[nr, nc]:
                continue
            if dr and dc and (cells[r, nc] or cells[nr, c]):
                continue
            nxt = (nr, nc)
            if nxt in closed:
                continue
            cost = base + (diag if dr and dc else res)
            if cost < best.get(nxt, math.inf):
                best[nxt] = cost
                parent[nxt] = cur
                counter += 1
                heapq.heappush(heap, (cost + h(nr, nc), counter, nxt))
    if found is None:
        return None
    chain = []
    node = found
    while node is not None:
        chain.append(node)
        node = parent[node]
    chain.reverse()
    return GridPath([grid.center(cell) for cell in chain], best[found], chain)


@dataclass
class NavRun:
    """Outcome of one navigation attempt: poses emitted once per tick."""

    arrived: bool
    poses: list[Position]
    ticks: int
    distance: float
    plan_cost: float | None = None

    def duration(self, dt: float) -> float:
        return self.ticks * dt


def _step_poses(waypoints: list[Position], pose: Position, step: float) -> list[Position]:
    """Pose after each tick moving ``step`` meters along the polyline."""
    pts = [pose] + list(waypoints)
    out = []
    carried = 0.0
    x, y = pose
    seg = 1
    while seg < len(pts):
        tx, ty = pts[seg]
        d = math.hypot(tx - x, ty - y)
        need = step - carried
        if d < need:
            carried += d
            x, y = tx, ty
            seg += 1
            continue
        x += (tx - x) * need / d
        y += (ty - y) * need / d
        carried = 0.0
        out.append((x, y))
    if carried > 0.0 or not out or out[-1] != (x, y):
        out.append((x, y))
    return out


def navigate_action(
    grid: OccupancyGrid,
    pose: Position,
    node_goal: Position,
    speed: float,
    dt: float = DEFAULT_DT,
    radius: float = GOAL_RADIUS,
) -> NavRun:
    """Plan to the goal region and follow the plan at constant speed."""
    if not (speed > 0 and dt > 0):
        raise ValueError("speed and dt must be positive")
    if math.hypot(pose[0] - node_goal[0], pose[1] - node_goal[1]) <= radius:
        return NavRun(True, [], 0, 0.0, 0.0)
    if grid.occupied(pose):
        return NavRun(False, [], 0, 0.0)
    path = plan_grid_path(grid, pose, node_goal, radius)
    if path is None:
        return NavRun(False, [], 0, 0.0)

    limit = TIMEOUT_FACTOR * max(path.cost, grid.resolution) / speed
    poses, distance = [], 0.0
    x, y = pose
    for k, (nx, ny) in enumerate(_step_poses(path.waypoints, pose, speed * dt), start=1):
        distance += math.hypot(nx - x, ny - y)
        x, y = nx, ny
        poses.append((x, y))
        if math.hypot(x - node_goal[0], y - node_goal[1]) <= radius:
            return NavRun(True, poses, k, distance, path.cost)
        if k * dt > limit:
            return NavRun(False, poses, k, distance, path.cost)
    return NavRun(False, poses, len(poses), distance, path.cost)


def observe_edge(
    grid: OccupancyGrid,
    pose: Position,
    edge_from: Position,
    edge_to: Position,
    lookahead: float = LOOKAHEAD,
    threshold: float = DETOUR_THRESHOLD,
) -> Status:
    """Blocked if reaching a point ``lookahead`` m along the edge needs a plan
    longer than ``threshold`` times the straight-line distance."""
    fx, fy = edge_from
    dx, dy = edge_to[0] - fx, edge_to[1] - fy
    length = math.hypot(dx, dy)
    reach = min(lookahead, length)
    target = (fx + dx / length * reach, fy + dy / length * reach)
    straight = math.hypot(target[0] - pose[0], target[1] - pose[1])
    if grid.occupied(pose):
        return Status.BLOCKED
    plan = plan_grid_path(grid, pose, target, grid.resolution)
    if plan is None:
        return Status.BLOCKED
    if plan.cost > threshold * straight:
        return Status.BLOCKED
    return Status.TRAVERSABLE


def wait_ticks(duration: float, dt: float = DEFAULT_DT) -> int:
    if duration < 0:
        raise ValueError("duration must be non-negative")
    return int(math.ceil(duration / dt - 1e-9))


def wait_action(duration: float, dt: float = DEFAULT_DT) -> Iterator[int]:
    """Yield tick indices 1..n; the caller may stop between ticks."""
    for k in range(1, wait_ticks(duration, dt) + 1):
        yield k
